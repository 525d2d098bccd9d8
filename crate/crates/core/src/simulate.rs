//! Random waves `F(x) = (1/√N) Σ a_μ e(μ·x)` and nodal volume by Crofton
//! line transects.
//!
//! Each antipodal pair carries one complex Gaussian `a = α + iβ` with
//! `α, β ~ N(0, 1/2)` and `a_{−μ} = ā_μ`, so `F` is real with `E F² = 1`.
//! A line `x₀ + t u` meets the nodal set at rate `κ_d · V` per unit length,
//! where `κ_d` is the mean of `|u₁|` over the unit sphere.

use std::f64::consts::PI;

use nalgebra::Complex;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::lattice::FrequencySet;
use crate::predict::{expected_volume, main_term_constant};
use crate::rng;
use crate::stats::{compensated_sum, mean, variance};

/// Minimum sampling density: points per shortest period `1/√m`.
pub const MIN_SAMPLES_PER_PERIOD: usize = 8;

/// Default sampling density. At the minimum density close root pairs are
/// missed often enough to bias the crossing rate by about half a percent.
pub const DEFAULT_SAMPLES_PER_PERIOD: usize = 64;

/// Bisection stops once the bracket is this short.
pub const ROOT_TOL: f64 = 1e-10;

/// Bootstrap resamples for variance uncertainties.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// `κ_d = Γ(d/2) / (√π Γ((d+1)/2))`.
pub fn kappa(d: usize) -> f64 {
    let d = d as f64;
    (ln_gamma(d / 2.0) - ln_gamma((d + 1.0) / 2.0)).exp() / PI.sqrt()
}

/// One realisation of the wave, stored as one coefficient per antipodal pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSample {
    d: usize,
    m: u64,
    n: usize,
    /// Frequencies of the pair representatives, flattened.
    freqs: Vec<i64>,
    /// `a_μ` for each representative `μ`.
    coeffs: Vec<Complex<f64>>,
    /// Set index of each representative and of its antipode.
    reps: Vec<(usize, usize)>,
}

impl WaveSample {
    /// Overrides the random draw with given representative coefficients.
    pub fn from_coefficients(set: &FrequencySet, coeffs: Vec<Complex<f64>>) -> Result<Self> {
        let reps = set.pair_representatives();
        if coeffs.len() != reps.len() {
            return Err(Error::Mismatch(format!(
                "{} coefficients for {} antipodal pairs",
                coeffs.len(),
                reps.len()
            )));
        }
        Ok(Self {
            d: set.d(),
            m: set.m(),
            n: set.n(),
            freqs: reps.iter().flat_map(|&i| set.point(i).to_vec()).collect(),
            coeffs,
            reps: reps.iter().map(|&i| (i, set.antipode(i))).collect(),
        })
    }

    /// Every coefficient equal to `c`.
    pub fn constant(set: &FrequencySet, c: Complex<f64>) -> Self {
        Self::from_coefficients(set, vec![c; set.pair_representatives().len()]).unwrap()
    }

    /// Only the pair of representative `pair` active, with coefficient `c`.
    pub fn single_pair(set: &FrequencySet, pair: usize, c: Complex<f64>) -> Result<Self> {
        let k = set.pair_representatives().len();
        if pair >= k {
            return Err(Error::InvalidArgument(format!("pair {pair} out of {k}")));
        }
        let mut coeffs = vec![Complex::new(0.0, 0.0); k];
        coeffs[pair] = c;
        Self::from_coefficients(set, coeffs)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn pairs(&self) -> usize {
        self.coeffs.len()
    }

    fn freq(&self, j: usize) -> &[i64] {
        &self.freqs[j * self.d..(j + 1) * self.d]
    }

    /// `a_μ` for set index `i`, conjugated on the antipodal half.
    pub fn coefficient(&self, i: usize) -> Option<Complex<f64>> {
        self.reps.iter().zip(&self.coeffs).find_map(|(&(p, q), &c)| {
            if p == i {
                Some(c)
            } else if q == i {
                Some(c.conj())
            } else {
                None
            }
        })
    }

    /// All `N` coefficients in set order.
    pub fn coefficients(&self) -> Vec<Complex<f64>> {
        let mut out = vec![Complex::new(0.0, 0.0); self.n];
        for (&(p, q), &c) in self.reps.iter().zip(&self.coeffs) {
            out[p] = c;
            out[q] = c.conj();
        }
        out
    }
}

pub fn sample_wave(set: &FrequencySet, seed: u64) -> WaveSample {
    sample_wave_indexed(set, seed, 0)
}

/// Sample number `index` of the family `seed`.
pub fn sample_wave_indexed(set: &FrequencySet, seed: u64, index: u64) -> WaveSample {
    let mut g = rng::stream(seed, rng::domain::WAVE, index, 0);
    let half = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
    let coeffs = (0..set.pair_representatives().len())
        .map(|_| Complex::new(half.sample(&mut g), half.sample(&mut g)))
        .collect();
    WaveSample::from_coefficients(set, coeffs).unwrap()
}

fn phase(mu: &[i64], x: &[f64]) -> f64 {
    let t: f64 = mu.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum();
    2.0 * PI * (t - t.round())
}

/// `F(x)` through the pairing `a e(φ) + ā e(−φ) = 2 Re(a e(φ))`.
pub fn eval_wave(sample: &WaveSample, x: &[f64]) -> f64 {
    let mut s = 0.0;
    for (j, c) in sample.coeffs.iter().enumerate() {
        let (sn, cs) = phase(sample.freq(j), x).sin_cos();
        s += c.re * cs - c.im * sn;
    }
    2.0 * s / (sample.n as f64).sqrt()
}

/// `F(x)` as the full complex sum over all `N` frequencies, `(re, im)`.
pub fn eval_wave_complex(sample: &WaveSample, set: &FrequencySet, x: &[f64]) -> (f64, f64) {
    let coeffs = sample.coefficients();
    let mut z = Complex::new(0.0, 0.0);
    for (mu, c) in set.points().zip(coeffs) {
        z += c * Complex::new(0.0, phase(mu, x)).exp();
    }
    let z = z / (sample.n as f64).sqrt();
    (z.re, z.im)
}

/// `g(t) = F(x₀ + t u) = Σ_j A_j cos(ω_j t) + B_j sin(ω_j t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineRestriction {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub omega: Vec<f64>,
}

impl LineRestriction {
    pub fn new(sample: &WaveSample, x0: &[f64], u: &[f64]) -> Self {
        let k = sample.pairs();
        let scale = 2.0 / (sample.n as f64).sqrt();
        let (mut a, mut b, mut omega) = (
            Vec::with_capacity(k),
            Vec::with_capacity(k),
            Vec::with_capacity(k),
        );
        for (j, c) in sample.coeffs.iter().enumerate() {
            let mu = sample.freq(j);
            let (sn, cs) = phase(mu, x0).sin_cos();
            a.push(scale * (c.re * cs - c.im * sn));
            b.push(scale * (-c.re * sn - c.im * cs));
            omega.push(2.0 * PI * mu.iter().zip(u).map(|(&m, &v)| m as f64 * v).sum::<f64>());
        }
        Self { a, b, omega }
    }

    /// A restriction with explicit terms, for tests.
    pub fn from_terms(a: Vec<f64>, b: Vec<f64>, omega: Vec<f64>) -> Self {
        Self { a, b, omega }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut s = 0.0;
        for ((&a, &b), &w) in self.a.iter().zip(&self.b).zip(&self.omega) {
            let (sn, cs) = (w * t).sin_cos();
            s += a * cs + b * sn;
        }
        s
    }

    /// Grid `t_k = k h` on `[0, length]` with at least `per_period` points
    /// per period of the fastest term, and `g` on it. Values come from a
    /// rotation recurrence per term.
    fn grid(&self, length: f64, per_period: usize, max_freq: f64) -> (f64, Vec<f64>) {
        let period = 2.0 * PI / max_freq.max(1e-300);
        let steps = ((length / period * per_period as f64).ceil() as usize).max(1);
        let h = length / steps as f64;
        let mut values = vec![0.0; steps + 1];
        for ((&a, &b), &w) in self.a.iter().zip(&self.b).zip(&self.omega) {
            let (sh, ch) = (w * h).sin_cos();
            let (mut s, mut c) = (0.0, 1.0);
            for v in values.iter_mut() {
                *v += a * c + b * s;
                let next_c = c * ch - s * sh;
                s = s * ch + c * sh;
                c = next_c;
            }
        }
        (h, values)
    }

    /// Sign changes of `g` on the sampling grid over `[0, length]`.
    pub fn zero_count(&self, length: f64, per_period: usize, max_freq: f64) -> usize {
        let (_, v) = self.grid(length, per_period, max_freq);
        v.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count()
    }

    /// Roots bracketed by the sampling grid, refined by bisection.
    pub fn roots(&self, length: f64, per_period: usize, max_freq: f64) -> Vec<f64> {
        let (h, v) = self.grid(length, per_period, max_freq);
        let mut out = Vec::new();
        for (k, w) in v.windows(2).enumerate() {
            if (w[0] >= 0.0) == (w[1] >= 0.0) {
                continue;
            }
            let (mut lo, mut hi) = (k as f64 * h, (k + 1) as f64 * h);
            let lo_sign = self.eval(lo) >= 0.0;
            while hi - lo > ROOT_TOL {
                let mid = 0.5 * (lo + hi);
                if (self.eval(mid) >= 0.0) == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        out
    }
}

/// Highest line frequency `2π√m`, which bounds `|ω_j|` for every direction.
fn max_line_frequency(m: u64) -> f64 {
    2.0 * PI * (m as f64).sqrt()
}

/// Zeros of `F` on the segment `x₀ + t u`, `t ∈ [0, length]`.
///
/// Sampling uses step `1/(64√m)`; pairs of roots closer than one step
/// (including double roots) can be missed.
pub fn transect_roots(sample: &WaveSample, x0: &[f64], u: &[f64], length: f64) -> Result<Vec<f64>> {
    check_line(sample, x0, u, length)?;
    let line = LineRestriction::new(sample, x0, u);
    Ok(line.roots(length, DEFAULT_SAMPLES_PER_PERIOD, max_line_frequency(sample.m)))
}

pub fn transect_zero_count(sample: &WaveSample, x0: &[f64], u: &[f64], length: f64) -> Result<usize> {
    transect_zero_count_with(sample, x0, u, length, DEFAULT_SAMPLES_PER_PERIOD)
}

/// Zero count with a chosen sampling density (at least the default).
pub fn transect_zero_count_with(
    sample: &WaveSample,
    x0: &[f64],
    u: &[f64],
    length: f64,
    per_period: usize,
) -> Result<usize> {
    check_line(sample, x0, u, length)?;
    if per_period < MIN_SAMPLES_PER_PERIOD {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_SAMPLES_PER_PERIOD} samples per period are required"
        )));
    }
    let line = LineRestriction::new(sample, x0, u);
    Ok(line.zero_count(length, per_period, max_line_frequency(sample.m)))
}

fn check_line(sample: &WaveSample, x0: &[f64], u: &[f64], length: f64) -> Result<()> {
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!("length must be positive, got {length}")));
    }
    if x0.len() != sample.d || u.len() != sample.d {
        return Err(Error::Mismatch("line and wave dimensions differ".into()));
    }
    Ok(())
}

/// A uniform base point and a uniform direction for line `line` of sample
/// `sample_index`.
pub fn random_line(d: usize, seed: u64, sample_index: u64, line: u64) -> (Vec<f64>, Vec<f64>) {
    let mut g = rng::stream(seed, rng::domain::LINE, sample_index, line);
    let x0: Vec<f64> = (0..d).map(|_| g.random()).collect();
    loop {
        let u: Vec<f64> = (0..d).map(|_| g.sample(StandardNormal)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return (x0, u.into_iter().map(|v| v / norm).collect());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodalEstimate {
    pub volume: f64,
    pub n_lines: usize,
    /// Sample variance of the per-line zero counts.
    pub per_line_variance: f64,
    /// `√(per_line_variance / n_lines) / κ_d`
    pub std_error: f64,
}

pub fn crofton_volume(sample: &WaveSample, n_lines: usize, seed: u64) -> Result<NodalEstimate> {
    crofton_volume_indexed(sample, n_lines, seed, 0, DEFAULT_SAMPLES_PER_PERIOD)
}

/// Crofton estimate over `n_lines` unit segments drawn from the line
/// streams of sample `sample_index`.
pub fn crofton_volume_indexed(
    sample: &WaveSample,
    n_lines: usize,
    seed: u64,
    sample_index: u64,
    per_period: usize,
) -> Result<NodalEstimate> {
    if n_lines == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let max_freq = max_line_frequency(sample.m);
    let counts: Vec<f64> = (0..n_lines as u64)
        .map(|l| {
            let (x0, u) = random_line(sample.d, seed, sample_index, l);
            LineRestriction::new(sample, &x0, &u).zero_count(1.0, per_period, max_freq) as f64
        })
        .collect();
    let k = kappa(sample.d);
    let per_line_variance = if n_lines > 1 { variance(&counts) } else { 0.0 };
    Ok(NodalEstimate {
        volume: mean(&counts) / k,
        n_lines,
        per_line_variance,
        std_error: (per_line_variance / n_lines as f64).sqrt() / k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub index: usize,
    pub volume: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchStats {
    pub d: usize,
    pub m: u64,
    pub n: u64,
    pub n_samples: usize,
    pub n_lines: usize,
    pub seed: u64,
    pub samples_per_period: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub expected_volume: f64,
    pub raw_variance: f64,
    pub raw_variance_se: f64,
    /// `mean(per_line_variance) / (n_lines κ_d²)`
    pub noise_correction: f64,
    pub corrected_variance: f64,
    pub corrected_variance_se: f64,
    /// `(d−1)/(d(d+2)³) G_d² m/N²`
    pub main_term: f64,
    pub bootstrap_resamples: usize,
    #[serde(skip)]
    pub rows: Vec<SampleRow>,
}

impl BatchStats {
    /// One row per sample then a summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,volume,std_error\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:.12e},{:.12e}\n", r.index, r.volume, r.std_error));
        }
        out.push_str(&format!("mean,{:.12e},{:.12e}\n", self.mean, self.mean_se));
        out
    }
}

/// Batch of random waves, each estimated with `n_lines` transects.
pub fn batch_stats(
    set: &FrequencySet,
    n_samples: usize,
    n_lines: usize,
    seed: u64,
) -> Result<BatchStats> {
    batch_stats_with(set, n_samples, n_lines, seed, DEFAULT_SAMPLES_PER_PERIOD, |i| {
        sample_wave_indexed(set, seed, i as u64)
    })
}

/// [`batch_stats`] with a custom wave source and sampling density.
pub fn batch_stats_with<F>(
    set: &FrequencySet,
    n_samples: usize,
    n_lines: usize,
    seed: u64,
    per_period: usize,
    make_wave: F,
) -> Result<BatchStats>
where
    F: Fn(usize) -> WaveSample + Sync,
{
    if n_samples < 30 {
        return Err(Error::InsufficientData {
            needed: 30,
            got: n_samples,
        });
    }
    if n_lines < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: n_lines,
        });
    }
    if per_period < MIN_SAMPLES_PER_PERIOD {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_SAMPLES_PER_PERIOD} samples per period are required"
        )));
    }
    let estimates: Vec<NodalEstimate> = (0..n_samples)
        .into_par_iter()
        .map(|i| crofton_volume_indexed(&make_wave(i), n_lines, seed, i as u64, per_period))
        .collect::<Result<_>>()?;

    let volumes: Vec<f64> = estimates.iter().map(|e| e.volume).collect();
    let plv: Vec<f64> = estimates.iter().map(|e| e.per_line_variance).collect();
    let k = kappa(set.d());
    let noise_scale = 1.0 / (n_lines as f64 * k * k);
    let raw_variance = variance(&volumes);
    let noise_correction = mean(&plv) * noise_scale;

    let boot: Vec<(f64, f64)> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|b| {
            let mut g = rng::stream(seed, rng::domain::BOOTSTRAP, b as u64, 0);
            let picks: Vec<usize> = (0..n_samples).map(|_| g.random_range(0..n_samples)).collect();
            let v: Vec<f64> = picks.iter().map(|&i| volumes[i]).collect();
            let p: Vec<f64> = picks.iter().map(|&i| plv[i]).collect();
            let raw = variance(&v);
            (raw, raw - mean(&p) * noise_scale)
        })
        .collect();
    let raw_boot: Vec<f64> = boot.iter().map(|b| b.0).collect();
    let cor_boot: Vec<f64> = boot.iter().map(|b| b.1).collect();

    let (d, m, n) = (set.d(), set.m(), set.n() as u64);
    let nf = n as f64;
    Ok(BatchStats {
        d,
        m,
        n,
        n_samples,
        n_lines,
        seed,
        samples_per_period: per_period,
        mean: compensated_sum(&volumes) / n_samples as f64,
        mean_se: (raw_variance / n_samples as f64).sqrt(),
        expected_volume: expected_volume(d, m),
        raw_variance,
        raw_variance_se: variance(&raw_boot).sqrt(),
        noise_correction,
        corrected_variance: raw_variance - noise_correction,
        corrected_variance_se: variance(&cor_boot).sqrt(),
        main_term: main_term_constant(d) * m as f64 / (nf * nf),
        bootstrap_resamples: BOOTSTRAP_RESAMPLES,
        rows: estimates
            .iter()
            .enumerate()
            .map(|(index, e)| SampleRow {
                index,
                volume: e.volume,
                std_error: e.std_error,
            })
            .collect(),
    })
}
