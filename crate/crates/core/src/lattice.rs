//! Integer points on the sphere `|x|² = m` in `Z^d`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest accepted `m`. Keeps every coordinate below 2^16 so inner products
/// and their low powers stay comfortably inside `i128`.
pub const MAX_NORM: u64 = 1 << 31;

/// Whether `d = 4` with even `m` is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnumerationMode {
    /// Reject even `m` when `d = 4`; the point count is erratic there.
    #[default]
    Strict,
    Permissive,
}

/// The frequency set `E_m` together with its antipodal structure.
///
/// Points are stored row-major in lexicographic order. The set is immutable
/// once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencySet {
    d: usize,
    m: u64,
    coords: Vec<i64>,
    antipode: Vec<usize>,
    representatives: Vec<usize>,
}

#[derive(Serialize)]
struct FrequencySetJson<'a> {
    d: usize,
    m: u64,
    n: usize,
    points: Vec<&'a [i64]>,
}

impl FrequencySet {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// The cardinality `N`.
    pub fn n(&self) -> usize {
        self.antipode.len()
    }

    pub fn point(&self, i: usize) -> &[i64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[i64]> + '_ {
        self.coords.chunks_exact(self.d)
    }

    /// Index of `-μ_i`.
    pub fn antipode(&self, i: usize) -> usize {
        self.antipode[i]
    }

    /// One index per antipodal pair `{μ, -μ}`: the lexicographically larger one.
    pub fn pair_representatives(&self) -> &[usize] {
        &self.representatives
    }

    /// `⌊√m⌋`, the largest possible absolute coordinate.
    pub fn radius(&self) -> i64 {
        isqrt(self.m) as i64
    }

    pub fn dot(&self, i: usize, j: usize) -> i64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn index_of(&self, v: &[i64]) -> Option<usize> {
        if v.len() != self.d {
            return None;
        }
        let (mut lo, mut hi) = (0, self.n());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.point(mid).cmp(v) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// `{d, m, n, points}` with points in canonical order.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(FrequencySetJson {
            d: self.d,
            m: self.m,
            n: self.n(),
            points: self.points().collect(),
        })
        .expect("frequency set serialises")
    }
}

pub(crate) fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// All `x ∈ Z^d` with `x_1² + … + x_d² = m`, lexicographically sorted.
pub fn enumerate_frequencies(d: usize, m: u64, mode: EnumerationMode) -> Result<FrequencySet> {
    if d < 2 {
        return Err(Error::InvalidDimension { d, min: 2 });
    }
    if m < 1 {
        return Err(Error::InvalidNorm(m));
    }
    if m > MAX_NORM {
        return Err(Error::NormTooLarge { m, max: MAX_NORM });
    }
    if mode == EnumerationMode::Strict && d == 4 && m.is_multiple_of(2) {
        return Err(Error::EvenNormInDimensionFour(m));
    }

    let mut coords = Vec::new();
    let mut prefix = vec![0i64; d];
    descend(&mut prefix, 0, m, &mut coords);

    let n = coords.len() / d;
    if n == 0 {
        return Err(Error::NoLatticePoints { d, m });
    }
    let mut set = FrequencySet {
        d,
        m,
        coords,
        antipode: vec![0; n],
        representatives: Vec::with_capacity(n / 2),
    };
    // Lexicographic order on a negation-closed set reverses under negation.
    for i in 0..n {
        set.antipode[i] = n - 1 - i;
    }
    debug_assert!((0..n).all(|i| {
        let j = set.antipode[i];
        set.point(i).iter().zip(set.point(j)).all(|(a, b)| *a == -*b)
    }));
    set.representatives = (n / 2..n).collect();
    Ok(set)
}

// Coordinate descent: at depth i the remaining budget bounds |x_i|.
fn descend(prefix: &mut [i64], depth: usize, remaining: u64, out: &mut Vec<i64>) {
    let d = prefix.len();
    if depth == d - 1 {
        let r = isqrt(remaining);
        if r * r == remaining {
            let r = r as i64;
            prefix[depth] = -r;
            out.extend_from_slice(prefix);
            if r != 0 {
                prefix[depth] = r;
                out.extend_from_slice(prefix);
            }
        }
        return;
    }
    let bound = isqrt(remaining) as i64;
    for x in -bound..=bound {
        prefix[depth] = x;
        descend(prefix, depth + 1, remaining - (x * x) as u64, out);
    }
}

/// A built-in smooth test function on the unit sphere with a known average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    /// `g = 1`
    Constant,
    /// `g = u_1`
    FirstCoordinate,
    /// `g = u_1²`, average `1/d`
    FirstSquared,
    /// `g = u_1⁴`, average `3/(d(d+2))`
    FirstFourth,
    /// `g = u_1² u_2²`, average `1/(d(d+2))`
    MixedFourth,
    /// `g = u_1⁴ − 6u_1²u_2² + u_2⁴`, a degree-4 harmonic with average 0
    HarmonicFourth,
    /// `g = u_1⁶`, average `15/(d(d+2)(d+4))`
    FirstSixth,
}

impl TestFunction {
    pub const ALL: [TestFunction; 7] = [
        TestFunction::Constant,
        TestFunction::FirstCoordinate,
        TestFunction::FirstSquared,
        TestFunction::FirstFourth,
        TestFunction::MixedFourth,
        TestFunction::HarmonicFourth,
        TestFunction::FirstSixth,
    ];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or(Error::UnknownTestFunction(i))
    }

    pub fn eval(self, u: &[f64]) -> f64 {
        let u1 = u[0];
        let u2 = u.get(1).copied().unwrap_or(0.0);
        match self {
            TestFunction::Constant => 1.0,
            TestFunction::FirstCoordinate => u1,
            TestFunction::FirstSquared => u1 * u1,
            TestFunction::FirstFourth => u1.powi(4),
            TestFunction::MixedFourth => u1 * u1 * u2 * u2,
            TestFunction::HarmonicFourth => u1.powi(4) - 6.0 * u1 * u1 * u2 * u2 + u2.powi(4),
            TestFunction::FirstSixth => u1.powi(6),
        }
    }

    /// Average over the uniform measure on `S^{d-1}`.
    pub fn sphere_average(self, d: usize) -> f64 {
        let d = d as f64;
        match self {
            TestFunction::Constant => 1.0,
            TestFunction::FirstCoordinate | TestFunction::HarmonicFourth => 0.0,
            TestFunction::FirstSquared => 1.0 / d,
            TestFunction::FirstFourth => 3.0 / (d * (d + 2.0)),
            TestFunction::MixedFourth => 1.0 / (d * (d + 2.0)),
            TestFunction::FirstSixth => 15.0 / (d * (d + 2.0) * (d + 4.0)),
        }
    }
}

/// `(1/N) Σ g(μ/|μ|) − ⟨g⟩_sphere` for the test function at `test_index`.
pub fn equidistribution_statistic(set: &FrequencySet, test_index: usize) -> Result<f64> {
    let g = TestFunction::from_index(test_index)?;
    let scale = 1.0 / (set.m() as f64).sqrt();
    let mut u = vec![0.0; set.d()];
    let total: f64 = set
        .points()
        .map(|p| {
            for (ui, &pi) in u.iter_mut().zip(p) {
                *ui = pi as f64 * scale;
            }
            g.eval(&u)
        })
        .sum();
    Ok(total / set.n() as f64 - g.sphere_average(set.d()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_count(d: usize, m: u64) -> usize {
        let b = isqrt(m) as i64 + 1;
        let mut count = 0;
        let mut x = vec![-b; d];
        loop {
            if x.iter().map(|v| (v * v) as u64).sum::<u64>() == m {
                count += 1;
            }
            let mut i = 0;
            loop {
                if i == d {
                    return count;
                }
                x[i] += 1;
                if x[i] <= b {
                    break;
                }
                x[i] = -b;
                i += 1;
            }
        }
    }

    #[test]
    fn unit_sphere_in_four_dimensions() {
        let set = enumerate_frequencies(4, 1, EnumerationMode::Strict).unwrap();
        assert_eq!(set.n(), 8);
        assert!(set.points().all(|p| p.iter().filter(|&&c| c != 0).count() == 1));
    }

    #[test]
    fn small_counts_match_exhaustive_search() {
        assert_eq!(enumerate_frequencies(5, 2, EnumerationMode::Strict).unwrap().n(), 40);
        assert_eq!(enumerate_frequencies(4, 5, EnumerationMode::Strict).unwrap().n(), 48);
        for m in (1..=49).step_by(2) {
            let set = enumerate_frequencies(4, m, EnumerationMode::Strict).unwrap();
            assert_eq!(set.n(), brute_count(4, m), "m = {m}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert_eq!(
            enumerate_frequencies(1, 3, EnumerationMode::Strict),
            Err(Error::InvalidDimension { d: 1, min: 2 })
        );
        assert_eq!(
            enumerate_frequencies(4, 0, EnumerationMode::Strict),
            Err(Error::InvalidNorm(0))
        );
        assert_eq!(
            enumerate_frequencies(4, 6, EnumerationMode::Strict),
            Err(Error::EvenNormInDimensionFour(6))
        );
        assert!(enumerate_frequencies(4, 6, EnumerationMode::Permissive).is_ok());
    }

    #[test]
    fn growth_exponent_in_five_dimensions() {
        // N ≍ m^{3/2}; the band is loose, this only guards against gross errors.
        for m in 20..=100 {
            let n = enumerate_frequencies(5, m, EnumerationMode::Strict).unwrap().n() as f64;
            let e = n.ln() / (m as f64).ln();
            assert!((1.3..2.6).contains(&e), "m = {m}: exponent {e}");
        }
    }

    #[test]
    fn equidistribution_examples() {
        let set = enumerate_frequencies(4, 1, EnumerationMode::Strict).unwrap();
        assert_eq!(equidistribution_statistic(&set, 0).unwrap(), 0.0);
        assert_eq!(equidistribution_statistic(&set, 1).unwrap(), 0.0);
        assert!(equidistribution_statistic(&set, 2).unwrap().abs() < 1e-15);
        assert_eq!(
            equidistribution_statistic(&set, 99),
            Err(Error::UnknownTestFunction(99))
        );
    }

    #[test]
    fn quartic_deviation_shrinks_along_the_tail() {
        let window_max = |lo: u64, hi: u64| {
            (lo..=hi)
                .map(|m| {
                    let set = enumerate_frequencies(5, m, EnumerationMode::Strict).unwrap();
                    equidistribution_statistic(&set, 3).unwrap().abs()
                })
                .fold(0.0, f64::max)
        };
        assert!(window_max(200, 240) < window_max(10, 50));
    }

    #[test]
    fn json_export_shape() {
        let set = enumerate_frequencies(4, 1, EnumerationMode::Strict).unwrap();
        let v = set.to_json();
        assert_eq!(v["n"], 8);
        assert_eq!(v["points"][0], serde_json::json!([-1, 0, 0, 0]));
    }

    proptest! {
        #[test]
        fn sets_are_sorted_closed_and_balanced(d in 2usize..7, m in 1u64..60) {
            prop_assume!(!(d == 4 && m % 2 == 0));
            let Ok(set) = enumerate_frequencies(d, m, EnumerationMode::Strict) else {
                // only d = 2, 3 have non-representable m
                prop_assert!(d < 4);
                return Ok(());
            };
            let pts: Vec<&[i64]> = set.points().collect();
            prop_assert!(pts.windows(2).all(|w| w[0] < w[1]));
            for (i, p) in pts.iter().enumerate() {
                prop_assert_eq!(p.iter().map(|c| c * c).sum::<i64>() as u64, m);
                let neg: Vec<i64> = p.iter().map(|c| -c).collect();
                prop_assert_eq!(set.index_of(&neg), Some(set.antipode(i)));
            }
            for k in 0..d {
                prop_assert_eq!(pts.iter().map(|p| p[k]).sum::<i64>(), 0);
            }
            prop_assert_eq!(set.pair_representatives().len() * 2, set.n());
        }
    }
}
