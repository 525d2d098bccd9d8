//! Moments `B_k = (1/(m^k N²)) Σ_{μ_1, μ_2} (μ_1·μ_2)^k` of the normalised
//! inner product between two frequencies.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::lattice::FrequencySet;
use crate::rational::{self, Rational};

pub const MAX_ORDER: u32 = 8;

/// `Σ_{μ_1, μ_2} (μ_1·μ_2)^k` as an exact integer.
///
/// Uses `(μ_1·μ_2)^k = Σ_{|α|=k} binom(k; α) μ_1^α μ_2^α`, so the double sum
/// collapses to `Σ_α binom(k; α) S_α²` with power sums `S_α = Σ_μ μ^α`.
/// Cost is `O(N · #α)` instead of `O(N²)`.
pub fn inner_product_power_sum(set: &FrequencySet, k: u32) -> Result<i128> {
    if !(1..=MAX_ORDER).contains(&k) {
        return Err(Error::MomentOrderOutOfRange(k));
    }
    let d = set.d();
    let mut alpha = vec![0u32; d];
    let mut total = 0i128;
    let factorial = |n: u32| (1..=i128::from(n)).product::<i128>();
    let k_fact = factorial(k);
    loop {
        if alpha.iter().sum::<u32>() == k {
            let multinomial = alpha.iter().fold(k_fact, |acc, &a| acc / factorial(a));
            let mut s = 0i128;
            for p in set.points() {
                let mut term = 1i128;
                for (&c, &a) in p.iter().zip(&alpha) {
                    term *= i128::from(c).pow(a);
                }
                s += term;
            }
            let contrib = s
                .checked_mul(s)
                .and_then(|sq| sq.checked_mul(multinomial))
                .ok_or(Error::Overflow("moment power sum"))?;
            total = total
                .checked_add(contrib)
                .ok_or(Error::Overflow("moment power sum"))?;
        }
        if !next_composition(&mut alpha, k) {
            return Ok(total);
        }
    }
}

// Odometer over exponent vectors with entries in 0..=k, pruned by total degree.
fn next_composition(alpha: &mut [u32], k: u32) -> bool {
    for i in 0..alpha.len() {
        let used: u32 = alpha[i + 1..].iter().sum();
        if alpha[i] + used < k {
            alpha[i] += 1;
            return true;
        }
        alpha[i] = 0;
    }
    false
}

/// `B_k` as an exact rational.
pub fn b_k_exact(set: &FrequencySet, k: u32) -> Result<Rational> {
    let num = inner_product_power_sum(set, k)?;
    let n = set.n() as i128;
    let den = rational::checked_pow(set.m() as i128, k)?
        .checked_mul(n * n)
        .ok_or(Error::Overflow("moment denominator"))?;
    rational::ratio(num, den)
}

/// The limit `Γ((k+1)/2) Γ(d/2) / (Γ((k+d)/2) Γ(1/2))` for even `k ≥ 2`.
pub fn b_k_limit(d: usize, k: u32) -> Result<f64> {
    if k < 2 || k % 2 == 1 {
        return Err(Error::OddMomentLimit(k));
    }
    if d < 2 {
        return Err(Error::InvalidDimension { d, min: 2 });
    }
    if k == 2 {
        return Ok(1.0 / d as f64);
    }
    let (k, d) = (f64::from(k), d as f64);
    Ok((ln_gamma((k + 1.0) / 2.0) + ln_gamma(d / 2.0)
        - ln_gamma((k + d) / 2.0)
        - ln_gamma(0.5))
    .exp())
}

/// The same limit as a reduced rational: `(k−1)!! / (d (d+2) ⋯ (d+k−2))`.
pub fn b_k_limit_rational(d: usize, k: u32) -> Result<Rational> {
    if k < 2 || k % 2 == 1 {
        return Err(Error::OddMomentLimit(k));
    }
    let d = d as i128;
    let mut q = Rational::from_integer(1);
    for j in 0..i128::from(k / 2) {
        q *= Rational::new(2 * j + 1, d + 2 * j);
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentValue {
    pub k: u32,
    #[serde(serialize_with = "rational::serialize")]
    pub exact: Rational,
    /// 0 for odd `k`.
    pub limit: f64,
    pub gap: f64,
}

pub fn moment_value(set: &FrequencySet, k: u32) -> Result<MomentValue> {
    let exact = b_k_exact(set, k)?;
    let limit = if k % 2 == 1 { 0.0 } else { b_k_limit(set.d(), k)? };
    Ok(MomentValue {
        k,
        gap: (rational::to_f64(&exact) - limit).abs(),
        exact,
        limit,
    })
}

/// CSV rows `m,k,exact_num,exact_den,limit,gap` with a header line.
pub fn moments_csv(rows: &[(u64, MomentValue)]) -> String {
    let mut out = String::from("m,k,exact_num,exact_den,limit,gap\n");
    for (m, v) in rows {
        out.push_str(&format!(
            "{},{},{},{},{:e},{:e}\n",
            m,
            v.k,
            v.exact.numer(),
            v.exact.denom(),
            v.limit,
            v.gap
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_frequencies, EnumerationMode};
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn set(d: usize, m: u64) -> FrequencySet {
        enumerate_frequencies(d, m, EnumerationMode::Strict).unwrap()
    }

    fn direct_sum(s: &FrequencySet, k: u32) -> i128 {
        let mut t = 0i128;
        for i in 0..s.n() {
            for j in 0..s.n() {
                t += i128::from(s.dot(i, j)).pow(k);
            }
        }
        t
    }

    #[test]
    fn power_sums_match_direct_double_sum() {
        for (d, m) in [(4, 5), (5, 3), (6, 2), (3, 9)] {
            let s = set(d, m);
            for k in 1..=MAX_ORDER {
                assert_eq!(inner_product_power_sum(&s, k).unwrap(), direct_sum(&s, k));
            }
        }
    }

    #[test]
    fn unit_sphere_moments() {
        let s = set(4, 1);
        assert_eq!(b_k_exact(&s, 1).unwrap(), Rational::from_integer(0));
        assert_eq!(b_k_exact(&s, 2).unwrap(), Rational::new(1, 4));
        assert_eq!(b_k_exact(&s, 4).unwrap(), Rational::new(1, 4));
        assert_eq!(b_k_exact(&s, 9), Err(Error::MomentOrderOutOfRange(9)));
    }

    #[test]
    fn odd_moments_vanish_and_second_moment_is_one_over_d() {
        for (d, m) in [(4, 3), (4, 9), (5, 7), (6, 5), (7, 4)] {
            let s = set(d, m);
            for k in [1, 3, 5, 7] {
                assert_eq!(b_k_exact(&s, k).unwrap(), Rational::from_integer(0));
            }
            assert_eq!(b_k_exact(&s, 2).unwrap(), Rational::new(1, d as i128));
        }
    }

    #[test]
    fn limit_values() {
        assert!((b_k_limit(4, 4).unwrap() - 0.125).abs() < 1e-14);
        assert!((b_k_limit(7, 2).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        // Γ(7/2)Γ(5/2) / (Γ(11/2)Γ(1/2)) = 15/315
        assert!((b_k_limit(5, 6).unwrap() - 1.0 / 21.0).abs() < 1e-14);
        assert_eq!(b_k_limit(4, 3), Err(Error::OddMomentLimit(3)));
        for d in 2..10 {
            for k in [2, 4, 6, 8] {
                let q = b_k_limit_rational(d, k).unwrap();
                assert!((rational::to_f64(&q) - b_k_limit(d, k).unwrap()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn limit_matches_sphere_monte_carlo() {
        const SAMPLES: usize = 400_000;
        for d in [4usize, 5, 6] {
            let mut rng = rng::stream(11, rng::domain::SPHERE, d as u64, 0);
            let mut sums = [0.0f64; 3];
            let mut sq = [0.0f64; 3];
            for _ in 0..SAMPLES {
                let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let norm2: f64 = g.iter().map(|x| x * x).sum();
                let c2 = g[0] * g[0] / norm2;
                for (i, v) in [c2, c2 * c2, c2 * c2 * c2].into_iter().enumerate() {
                    sums[i] += v;
                    sq[i] += v * v;
                }
            }
            for (i, k) in [2u32, 4, 6].into_iter().enumerate() {
                let mean = sums[i] / SAMPLES as f64;
                let var = sq[i] / SAMPLES as f64 - mean * mean;
                let se = (var / SAMPLES as f64).sqrt();
                let limit = b_k_limit(d, k).unwrap();
                assert!((mean - limit).abs() < 3.0 * se, "d={d} k={k}: {mean} vs {limit}");
            }
        }
    }

    #[test]
    fn fourth_moment_gap_decays_in_five_dimensions() {
        let gap = |m| moment_value(&set(5, m), 4).unwrap().gap;
        // every dyadic window beyond the first few contains a smaller gap
        for lo in [4u64, 8, 16, 32] {
            let best = (2 * lo..4 * lo).map(gap).fold(f64::INFINITY, f64::min);
            assert!(best < gap(lo), "window starting at {lo}");
        }
    }

    #[test]
    fn csv_layout() {
        let v = moment_value(&set(4, 1), 2).unwrap();
        let csv = moments_csv(&[(1, v)]);
        assert!(csv.starts_with("m,k,exact_num,exact_den,limit,gap\n1,2,1,4,"));
    }
}
