//! Exact torus integrals of products of `r`, `D`, `H` as correlation sums.
//!
//! Expanding every factor in Fourier modes and integrating over `T^d` keeps
//! only zero-sum tuples, so each integral is `±Σ_{C(ℓ)} P(μ) / N^ℓ` times a
//! power of `E = 4π²m`, for an integer polynomial `P` in the Gram entries
//! `g_ij = μ_i·μ_j`. Values are reported normalised by that power of `E`,
//! which makes them rational.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::correlations::KeyCodec;
use crate::error::{Error, Result};
use crate::lattice::FrequencySet;
use crate::rational::{self, Rational};

/// Largest `m` accepted; keeps every streamed sum inside `i128`.
pub const MAX_INTEGRAL_NORM: u64 = 1 << 12;

/// Dot products are tabulated when `N` is at most this.
const DOT_TABLE_MAX_N: usize = 4096;

/// The sixteen integrands. Names list the factors: `r`, `dd` for `|D|²`,
/// `h2` for `tr H²`, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralTag {
    /// `r²`
    IntR2,
    /// `|D|²`
    IntDd,
    /// `tr H²`
    IntH2,
    /// `r⁴`
    IntR4,
    /// `|D|⁴`
    IntDd2,
    /// `r² |D|²`
    IntR2dd,
    /// `r² tr H²`
    IntR2h2,
    /// `tr H⁴`
    IntH4,
    /// `(tr H²)²`
    IntH22,
    /// `|D|² tr H²`
    IntDdh2,
    /// `r DᵗHD`
    IntRdhd,
    /// `DᵗH²D`
    IntDh2d,
    /// `|D|⁶`
    IntDd3,
    /// `r⁴ |D|²`
    IntR4dd,
    /// `tr H⁶`
    IntH6,
    /// `r |D|² DᵗHD`
    IntRdddhd,
}

impl IntegralTag {
    pub const ALL: [IntegralTag; 16] = [
        IntegralTag::IntR2,
        IntegralTag::IntDd,
        IntegralTag::IntH2,
        IntegralTag::IntR4,
        IntegralTag::IntDd2,
        IntegralTag::IntR2dd,
        IntegralTag::IntR2h2,
        IntegralTag::IntH4,
        IntegralTag::IntH22,
        IntegralTag::IntDdh2,
        IntegralTag::IntRdhd,
        IntegralTag::IntDh2d,
        IntegralTag::IntDd3,
        IntegralTag::IntR4dd,
        IntegralTag::IntH6,
        IntegralTag::IntRdddhd,
    ];

    pub fn name(self) -> &'static str {
        use IntegralTag::*;
        match self {
            IntR2 => "int_r2",
            IntDd => "int_dd",
            IntH2 => "int_h2",
            IntR4 => "int_r4",
            IntDd2 => "int_dd2",
            IntR2dd => "int_r2dd",
            IntR2h2 => "int_r2h2",
            IntH4 => "int_h4",
            IntH22 => "int_h22",
            IntDdh2 => "int_ddh2",
            IntRdhd => "int_rdhd",
            IntDh2d => "int_dh2d",
            IntDd3 => "int_dd3",
            IntR4dd => "int_r4dd",
            IntH6 => "int_h6",
            IntRdddhd => "int_rdddhd",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown integral '{s}'")))
    }

    /// Number of Fourier factors `ℓ`.
    pub fn order(self) -> u32 {
        use IntegralTag::*;
        match self {
            IntR2 | IntDd | IntH2 => 2,
            IntDd3 | IntR4dd | IntH6 | IntRdddhd => 6,
            _ => 4,
        }
    }

    /// Power `k` of `E` carried by the integrand: `#D/2 + #H`.
    pub fn e_power(self) -> u32 {
        use IntegralTag::*;
        match self {
            IntR2 | IntR4 => 0,
            IntDd | IntR2dd | IntR4dd => 1,
            IntH2 | IntDd2 | IntR2h2 | IntRdhd => 2,
            IntDdh2 | IntDh2d | IntDd3 | IntRdddhd => 3,
            IntH4 | IntH22 => 4,
            IntH6 => 6,
        }
    }

    /// `(−1)^k`, from `i² = −1` on each pair of derivative factors.
    fn sign(self) -> i128 {
        if self.e_power().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// The leading behaviour in `N` with `B_2 = 1/d` and `B_4` at its
    /// limit; `None` for the order-six integrals, which are `O(R(6))`.
    pub fn main_term(self, d: usize, n: u64) -> Option<Rational> {
        use IntegralTag::*;
        let d = d as i128;
        let n = n as i128;
        let n2 = n * n;
        let q = |num: i128, den: i128| Some(Rational::new(num, den));
        match self {
            IntR2 | IntDd | IntH2 => q(1, n),
            IntR4 => q(3, n2),
            IntDd2 | IntR2h2 => q(d + 2, d * n2),
            IntR2dd | IntDdh2 => q(1, n2),
            IntH4 => q(2 * d + 7, d * (d + 2) * n2),
            IntH22 => q(d * d + 2 * d + 6, d * (d + 2) * n2),
            IntRdhd => q(-1, d * n2),
            IntDh2d => q(1, d * n2),
            IntDd3 | IntR4dd | IntH6 | IntRdddhd => None,
        }
    }
}

/// Pairs `(i, j)` grouped by `μ_i + μ_j`, plus a Gram table when small.
///
/// Keys use a codec of span `4R` so that the key of any sum of two pair sums
/// stays in range, and `key(−v₁−v₂) = 3·key(0) − key(v₁) − key(v₂)`.
#[derive(Debug, Clone)]
pub struct TupleMaterials {
    d: usize,
    m: u64,
    n: usize,
    codec: KeyCodec,
    keys: Vec<u128>,
    buckets: Vec<Vec<(u32, u32)>>,
    index: HashMap<u128, usize>,
    dots: Option<Vec<i64>>,
    points: Vec<i64>,
}

impl TupleMaterials {
    /// Materialises all `N²` ordered pairs; refuses if `N² > pair_cap`.
    pub fn build(set: &FrequencySet, pair_cap: u64) -> Result<Self> {
        let (d, m, n) = (set.d(), set.m(), set.n());
        if m > MAX_INTEGRAL_NORM {
            return Err(Error::NormTooLarge {
                m,
                max: MAX_INTEGRAL_NORM,
            });
        }
        let pairs = (n as u64) * (n as u64);
        if pairs > pair_cap {
            return Err(Error::TableTooLarge {
                entries: pairs,
                cap: pair_cap,
            });
        }
        let codec = KeyCodec::new(d, 4 * set.radius())?;
        let point_keys: Vec<u128> = set.points().map(|p| codec.encode(p).unwrap()).collect();
        let offset = codec.encode(&vec![0; d]).unwrap();

        let mut index: HashMap<u128, usize> = HashMap::new();
        let mut keys = Vec::new();
        let mut buckets: Vec<Vec<(u32, u32)>> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let k = point_keys[i] + point_keys[j] - offset;
                let b = *index.entry(k).or_insert_with(|| {
                    keys.push(k);
                    buckets.push(Vec::new());
                    keys.len() - 1
                });
                buckets[b].push((i as u32, j as u32));
            }
        }

        let dots = (n <= DOT_TABLE_MAX_N).then(|| {
            let mut t = vec![0i64; n * n];
            for i in 0..n {
                for j in 0..n {
                    t[i * n + j] = set.dot(i, j);
                }
            }
            t
        });

        Ok(Self {
            d,
            m,
            n,
            codec,
            keys,
            buckets,
            index,
            dots,
            points: set.points().flatten().copied().collect(),
        })
    }

    pub fn support_len(&self) -> usize {
        self.keys.len()
    }

    fn dot(&self, i: u32, j: u32) -> i128 {
        let (i, j) = (i as usize, j as usize);
        let g = match &self.dots {
            Some(t) => t[i * self.n + j],
            None => {
                let d = self.d;
                self.points[i * d..(i + 1) * d]
                    .iter()
                    .zip(&self.points[j * d..(j + 1) * d])
                    .map(|(a, b)| a * b)
                    .sum()
            }
        };
        i128::from(g)
    }

    fn offset(&self) -> u128 {
        self.codec.encode(&vec![0; self.d]).unwrap()
    }

    fn partner(&self, target: u128) -> Option<usize> {
        self.index.get(&target).copied()
    }

    /// `|C(6)|` by `Σ_{v₁, v₂} a(v₁) a(v₂) a(−v₁−v₂)`; `O(support²)`.
    fn c6(&self) -> u64 {
        let three = 3 * self.offset();
        self.keys
            .par_iter()
            .enumerate()
            .map(|(b1, &k1)| {
                let mut t = 0u64;
                for (b2, &k2) in self.keys.iter().enumerate() {
                    if let Some(b3) = self.partner(three - k1 - k2) {
                        t += (self.buckets[b1].len()
                            * self.buckets[b2].len()
                            * self.buckets[b3].len()) as u64;
                    }
                }
                t
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }
}

/// One exact integral, normalised by `E^e_power`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactIntegral {
    pub tag: IntegralTag,
    #[serde(serialize_with = "rational::serialize")]
    pub value: Rational,
    pub e_power: u32,
    pub order: u32,
    #[serde(serialize_with = "rational::serialize_opt")]
    pub main_term: Option<Rational>,
}

impl ExactIntegral {
    pub fn value_f64(&self) -> f64 {
        rational::to_f64(&self.value)
    }

    /// The un-normalised integral `value · E^e_power`.
    pub fn raw_value(&self, m: u64) -> f64 {
        self.value_f64() * super::energy(m).powi(self.e_power as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Order6Status {
    Computed,
    NotRequested,
    BudgetExceeded,
}

/// All integrals available for one set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralSet {
    pub d: usize,
    pub m: u64,
    pub n: u64,
    pub c4: u64,
    pub c6: Option<u64>,
    pub order6_status: Order6Status,
    pub integrals: Vec<ExactIntegral>,
}

impl IntegralSet {
    pub fn get(&self, tag: IntegralTag) -> Option<&ExactIntegral> {
        self.integrals.iter().find(|i| i.tag == tag)
    }

    pub fn value(&self, tag: IntegralTag) -> Option<Rational> {
        self.get(tag).map(|i| i.value)
    }
}

fn normalise(
    tag: IntegralTag,
    sum: i128,
    d: usize,
    m: u64,
    n: usize,
) -> Result<ExactIntegral> {
    let den = rational::checked_pow(m as i128, tag.e_power())?
        .checked_mul(rational::checked_pow(n as i128, tag.order())?)
        .ok_or(Error::Overflow("integral denominator"))?;
    Ok(ExactIntegral {
        tag,
        value: rational::ratio(tag.sign() * sum, den)?,
        e_power: tag.e_power(),
        order: tag.order(),
        main_term: tag.main_term(d, n as u64),
    })
}

fn add(acc: &mut [i128], part: &[i128]) -> Result<()> {
    for (a, p) in acc.iter_mut().zip(part) {
        *a = a
            .checked_add(*p)
            .ok_or(Error::Overflow("correlation sum"))?;
    }
    Ok(())
}

const ORDER2: [IntegralTag; 3] = [IntegralTag::IntR2, IntegralTag::IntDd, IntegralTag::IntH2];

const ORDER4: [IntegralTag; 9] = [
    IntegralTag::IntR4,
    IntegralTag::IntDd2,
    IntegralTag::IntR2dd,
    IntegralTag::IntR2h2,
    IntegralTag::IntH4,
    IntegralTag::IntH22,
    IntegralTag::IntDdh2,
    IntegralTag::IntRdhd,
    IntegralTag::IntDh2d,
];

const ORDER6: [IntegralTag; 4] = [
    IntegralTag::IntDd3,
    IntegralTag::IntR4dd,
    IntegralTag::IntH6,
    IntegralTag::IntRdddhd,
];

// C(2) = {(μ, −μ)}, where g12 = −m.
fn order2_sums(set: &FrequencySet) -> [i128; 3] {
    let n = set.n() as i128;
    let g = -(set.m() as i128);
    [n, n * g, n * g * g]
}

fn order4_sums(mat: &TupleMaterials) -> Result<[i128; 9]> {
    let two = 2 * mat.offset();
    let parts: Vec<[i128; 9]> = mat
        .keys
        .par_iter()
        .enumerate()
        .map(|(b1, &k1)| {
            let mut s = [0i128; 9];
            let Some(b2) = mat.partner(two - k1) else {
                return s;
            };
            for &(i1, i2) in &mat.buckets[b1] {
                let g12 = mat.dot(i1, i2);
                for &(i3, i4) in &mat.buckets[b2] {
                    let g34 = mat.dot(i3, i4);
                    let g23 = mat.dot(i2, i3);
                    let g41 = mat.dot(i4, i1);
                    s[0] += 1;
                    s[1] += g12 * g34;
                    s[2] += g34;
                    s[3] += g34 * g34;
                    s[4] += g12 * g23 * g34 * g41;
                    s[5] += g12 * g12 * g34 * g34;
                    s[6] += g12 * g34 * g34;
                    s[7] += g23 * g34;
                    s[8] += g12 * g23 * g34;
                }
            }
            s
        })
        .collect();
    let mut total = [0i128; 9];
    for p in &parts {
        add(&mut total, p)?;
    }
    Ok(total)
}

fn order6_sums(mat: &TupleMaterials) -> Result<[i128; 5]> {
    let three = 3 * mat.offset();
    let parts: Vec<[i128; 5]> = mat
        .keys
        .par_iter()
        .enumerate()
        .map(|(b1, &k1)| {
            let mut s = [0i128; 5];
            for (b2, &k2) in mat.keys.iter().enumerate() {
                let Some(b3) = mat.partner(three - k1 - k2) else {
                    continue;
                };
                for &(i1, i2) in &mat.buckets[b1] {
                    let g12 = mat.dot(i1, i2);
                    for &(i3, i4) in &mat.buckets[b2] {
                        let g34 = mat.dot(i3, i4);
                        let g23 = mat.dot(i2, i3);
                        for &(i5, i6) in &mat.buckets[b3] {
                            let g56 = mat.dot(i5, i6);
                            let g45 = mat.dot(i4, i5);
                            let g61 = mat.dot(i6, i1);
                            s[0] += 1;
                            s[1] += g12 * g34 * g56;
                            s[2] += g56;
                            s[3] += g12 * g23 * g34 * g45 * g56 * g61;
                            s[4] += g23 * g45 * g56;
                        }
                    }
                }
            }
            s
        })
        .collect();
    let mut total = [0i128; 5];
    for p in &parts {
        add(&mut total, p)?;
    }
    Ok(total)
}

/// Work for the order-six stream: `support²` lookups plus `|C(6)|` visits.
fn order6_work(mat: &TupleMaterials, c6: u64) -> u64 {
    let s = mat.support_len() as u64;
    s.saturating_mul(s).saturating_add(c6)
}

fn check_set(set: &FrequencySet, mat: &TupleMaterials) -> Result<()> {
    if set.d() != mat.d || set.m() != mat.m || set.n() != mat.n {
        return Err(Error::Mismatch(
            "materials were built for a different frequency set".into(),
        ));
    }
    Ok(())
}

/// A single integral. Order-six tags stream `C(6)` and need
/// `support² + |C(6)| ≤ c6_budget`.
pub fn exact_integral(
    set: &FrequencySet,
    mat: &TupleMaterials,
    tag: IntegralTag,
    c6_budget: u64,
) -> Result<ExactIntegral> {
    check_set(set, mat)?;
    let (d, m, n) = (set.d(), set.m(), set.n());
    let pick = |tags: &[IntegralTag], sums: &[i128]| {
        let i = tags.iter().position(|&t| t == tag).unwrap();
        normalise(tag, sums[i], d, m, n)
    };
    match tag.order() {
        2 => pick(&ORDER2, &order2_sums(set)),
        4 => pick(&ORDER4, &order4_sums(mat)?),
        _ => {
            let c6 = mat.c6();
            let work = order6_work(mat, c6);
            if work > c6_budget {
                return Err(Error::BudgetExceeded {
                    needed: work,
                    budget: c6_budget,
                });
            }
            pick(&ORDER6, &order6_sums(mat)?[1..])
        }
    }
}

/// Every integral of order two and four, and the order-six ones when
/// `c6_budget` is given and suffices.
pub fn all_exact_integrals(
    set: &FrequencySet,
    mat: &TupleMaterials,
    c6_budget: Option<u64>,
) -> Result<IntegralSet> {
    check_set(set, mat)?;
    let (d, m, n) = (set.d(), set.m(), set.n());
    let mut integrals = Vec::with_capacity(16);
    for (tag, s) in ORDER2.iter().zip(order2_sums(set)) {
        integrals.push(normalise(*tag, s, d, m, n)?);
    }
    let s4 = order4_sums(mat)?;
    let c4 = u64::try_from(s4[0]).map_err(|_| Error::Overflow("|C(4)|"))?;
    for (tag, s) in ORDER4.iter().zip(s4) {
        integrals.push(normalise(*tag, s, d, m, n)?);
    }

    let mut c6 = None;
    let order6_status = match c6_budget {
        None => Order6Status::NotRequested,
        Some(budget) => {
            let count = mat.c6();
            if order6_work(mat, count) > budget {
                Order6Status::BudgetExceeded
            } else {
                let s6 = order6_sums(mat)?;
                c6 = Some(count);
                for (tag, s) in ORDER6.iter().zip(&s6[1..]) {
                    integrals.push(normalise(*tag, *s, d, m, n)?);
                }
                Order6Status::Computed
            }
        }
    };

    Ok(IntegralSet {
        d,
        m,
        n: n as u64,
        c4,
        c6,
        order6_status,
        integrals,
    })
}
