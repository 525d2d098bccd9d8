//! Gaussian norm products, the block determinant `f(t, s)`, the pointwise
//! two-point intensity `K2` and the singular set.
//!
//! `K2` is reported in units of `E/d = 4π²m/d`, so that far from the
//! diagonal it tends to `G_d²/4π²`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::FrequencySet;
use crate::predict::g_constant;
use crate::quad::adaptive_simpson;
use crate::rational::{self, Rational};
use crate::rng;
use crate::spectral::{eval_frame, SpectralFrame, Traces};
use crate::stats::Moments;

/// Eigenvalues above `−PSD_TOL` are clipped to zero before factoring.
pub const PSD_TOL: f64 = 1e-9;

/// Samples per Monte Carlo block; each block owns one random stream.
pub const MC_BLOCK: usize = 1 << 14;

/// Cosine threshold in the singular-set definition.
pub const SINGULAR_COS: f64 = 0.75;

const SYMMETRY_TOL: f64 = 1e-10;

/// `I + [[X, Y], [Y, X]]`, the normalised conditional covariance of the
/// two gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMatrix {
    pub d: usize,
    pub x_block: DMatrix<f64>,
    pub y_block: DMatrix<f64>,
    pub full: DMatrix<f64>,
}

fn asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).amax()
}

impl OmegaMatrix {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        let d = x.nrows();
        if x.shape() != (d, d) || y.shape() != (d, d) {
            return Err(Error::Mismatch("X and Y must be square of equal size".into()));
        }
        let asym = asymmetry(&x).max(asymmetry(&y));
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        let mut full = DMatrix::identity(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                full[(i, j)] += x[(i, j)];
                full[(i + d, j + d)] += x[(i, j)];
                full[(i, j + d)] = y[(i, j)];
                full[(i + d, j)] = y[(i, j)];
            }
        }
        Ok(Self {
            d,
            x_block: x,
            y_block: y,
            full,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::new(DMatrix::zeros(d, d), DMatrix::zeros(d, d)).unwrap()
    }

    pub fn from_frame(frame: &SpectralFrame) -> Result<Self> {
        match (&frame.x_mat, &frame.y_mat) {
            (Some(x), Some(y)) => Self::new(x.clone(), y.clone()),
            _ => Err(Error::InvalidArgument(format!(
                "degenerate point: |r| = {} is too close to 1",
                frame.r.abs()
            ))),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.full
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `L` with `L Lᵗ = Ω`, from a clipped symmetric eigendecomposition.
    fn factor(&self) -> Result<DMatrix<f64>> {
        let eig = SymmetricEigen::new(self.full.clone());
        let min = eig.eigenvalues.min();
        if min < -PSD_TOL {
            return Err(Error::NotPositiveSemidefinite(min));
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
    }
}

/// The coefficients `A_0 … A_7` of the norm-product expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionCoefficients {
    #[serde(serialize_with = "rational::serialize")]
    pub a0: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub a1: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub a2: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub a3: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub a4: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub a5: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub a6: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub a7: Rational,
}

pub fn expansion_coefficients(d: usize) -> Result<ExpansionCoefficients> {
    if d < 2 {
        return Err(Error::InvalidDimension { d, min: 2 });
    }
    let d = d as i128;
    let d2 = d * d;
    let a5 = Rational::new(1, 4 * d2 * (d + 2) * (d + 2));
    Ok(ExpansionCoefficients {
        a0: Rational::from_integer(1),
        a1: Rational::new(1, d),
        a2: Rational::new(1, 2 * d2),
        a3: Rational::new(-1, d2 * (d + 2)),
        a4: Rational::new(-(d - 1), 2 * d2 * (d + 2)),
        a5,
        a6: a5 / 2,
        a7: Rational::new(-1, 2 * d2 * (d + 2)),
    })
}

/// Series value of `E[|w₁| |w₂|]` and the size of the first dropped order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormProductSeries {
    pub value: f64,
    /// `|tr X³| + |tr Y⁶|`
    pub dropped_monitor: f64,
}

fn series_bracket(a: &ExpansionCoefficients, t: &Traces) -> f64 {
    let f = |q: Rational| rational::to_f64(&q);
    f(a.a0)
        + f(a.a1) * t.tr_x
        + f(a.a2) * t.tr_y2
        + f(a.a3) * t.tr_xy2
        + f(a.a4) * t.tr_x2
        + f(a.a5) * t.tr_y4
        + f(a.a6) * t.tr_y2 * t.tr_y2
        + f(a.a7) * t.tr_x * t.tr_y2
}

pub fn norm_product_expectation(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    d: usize,
) -> Result<NormProductSeries> {
    let omega = OmegaMatrix::new(x.clone(), y.clone())?;
    if omega.d != d {
        return Err(Error::Mismatch(format!("blocks are {0}×{0}, d = {d}", omega.d)));
    }
    let a = expansion_coefficients(d)?;
    let t = Traces::of(x, y);
    let g = g_constant(d);
    Ok(NormProductSeries {
        value: g * g / (2.0 * PI) * series_bracket(&a, &t),
        dropped_monitor: t.tr_x3.abs() + t.tr_y6.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Monte Carlo `E[|w₁| |w₂|]` for `(w₁, w₂) ~ N(0, Ω)`.
///
/// Blocks of [`MC_BLOCK`] samples run in parallel on their own streams and
/// are merged in block order.
pub fn mc_norm_product(omega: &OmegaMatrix, samples: u64, seed: u64) -> Result<McEstimate> {
    if samples < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: samples as usize,
        });
    }
    let l = omega.factor()?;
    let d = omega.d;
    let blocks = samples.div_ceil(MC_BLOCK as u64);
    let parts: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut g = rng::stream(seed, rng::domain::NORM_PRODUCT, b, 0);
            let count = (samples - b * MC_BLOCK as u64).min(MC_BLOCK as u64);
            let mut acc = Moments::default();
            let mut z = DVector::zeros(2 * d);
            let mut w = DVector::zeros(2 * d);
            for _ in 0..count {
                for zi in z.iter_mut() {
                    *zi = g.sample(StandardNormal);
                }
                l.mul_to(&z, &mut w);
                let n1 = w.rows(0, d).norm();
                let n2 = w.rows(d, d).norm();
                acc.push(n1 * n2);
            }
            acc
        })
        .collect();
    let total = parts
        .iter()
        .fold(Moments::default(), |acc, p| acc.merge(p));
    Ok(McEstimate {
        mean: total.mean,
        std_error: total.std_error(),
        samples: total.count,
    })
}

/// `η(t) = (1+t)^{−d/2}`.
pub fn eta(d: usize, t: f64) -> f64 {
    (1.0 + t).powf(-(d as f64) / 2.0)
}

/// `θ(t) = t/(1+t) · η(t)`.
pub fn theta(d: usize, t: f64) -> f64 {
    t / (1.0 + t) * eta(d, t)
}

/// `ξ(t) = (t/(1+t))² · η(t)`.
pub fn xi(d: usize, t: f64) -> f64 {
    let a = t / (1.0 + t);
    a * a * eta(d, t)
}

/// `∫(1−η) t^{−3/2}`, `∫θ t^{−3/2}`, `∫ξ t^{−3/2}` over `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaIntegrals {
    pub eta: f64,
    pub theta: f64,
    pub xi: f64,
}

/// Closed forms `G_d`, `G_d/d`, `G_d/(d(d+2))`.
pub fn eta_theta_xi_integrals(d: usize) -> EtaIntegrals {
    let g = g_constant(d);
    let d = d as f64;
    EtaIntegrals {
        eta: g,
        theta: g / d,
        xi: g / (d * (d + 2.0)),
    }
}

/// The same integrals by adaptive quadrature, for cross-checking.
///
/// With `t = u²` the weight becomes `2 du/u²`; `[1, ∞)` maps to `(0, 1]`
/// through `u = 1/v`, where it becomes `2 dv`.
pub fn eta_theta_xi_quadrature(d: usize, tol: f64) -> EtaIntegrals {
    let integral = |g: &dyn Fn(f64) -> f64, at_infinity: f64| {
        let head = |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                2.0 * g(u * u) / (u * u)
            }
        };
        let tail = |v: f64| {
            if v == 0.0 {
                2.0 * at_infinity
            } else {
                2.0 * g(1.0 / (v * v))
            }
        };
        // the head integrand has finite limits at 0; the endpoint value only
        // affects one Simpson node, so fill it from a nearby sample
        let head_fixed = |u: f64| if u == 0.0 { head(1e-8) } else { head(u) };
        adaptive_simpson(&head_fixed, 0.0, 1.0, tol) + adaptive_simpson(&tail, 0.0, 1.0, tol)
    };
    EtaIntegrals {
        // 1 − η without cancellation near t = 0
        eta: integral(&|t| -(-(d as f64) / 2.0 * t.ln_1p()).exp_m1(), 1.0),
        theta: integral(&|t| theta(d, t), 0.0),
        xi: integral(&|t| xi(d, t), 0.0),
    }
}

/// `I + J(t, s) = [[(1+t)I + tX, √(ts) Y], [√(ts) Y, (1+s)I + sX]]`.
fn block_matrix(t: f64, s: f64, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let d = x.nrows();
    let c = (t * s).sqrt();
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = t * x[(i, j)];
            m[(i + d, j + d)] = s * x[(i, j)];
            m[(i, j + d)] = c * y[(i, j)];
            m[(i + d, j)] = c * y[(i, j)];
        }
        m[(i, i)] += 1.0 + t;
        m[(i + d, i + d)] += 1.0 + s;
    }
    m
}

fn check_ts(t: f64, s: f64) -> Result<()> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t and s must be non-negative, got ({t}, {s})"
        )));
    }
    Ok(())
}

fn inv_sqrt_det(det: f64) -> Result<f64> {
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::SingularMatrix);
    }
    Ok(det.powf(-0.5))
}

/// `det(I + J(t, s))^{−1/2}` from a direct `2d × 2d` LU determinant.
pub fn f_exact(t: f64, s: f64, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    check_ts(t, s)?;
    inv_sqrt_det(block_matrix(t, s, x, y).lu().determinant())
}

/// The same quantity via `det(A) det(B − ts Y A⁻¹ Y)` with
/// `A = (1+t)I + tX`, `B = (1+s)I + sX`.
pub fn f_factored(t: f64, s: f64, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    check_ts(t, s)?;
    let d = x.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let a = &id * (1.0 + t) + x * t;
    let b = &id * (1.0 + s) + x * s;
    let lu = a.clone().lu();
    let a_inv_y = lu.solve(y).ok_or(Error::SingularMatrix)?;
    let schur = b - (y * a_inv_y) * (t * s);
    inv_sqrt_det(lu.determinant() * schur.lu().determinant())
}

/// Fourth-order Taylor form of `f` around `X = Y = 0`, with `X` counted as
/// second order. Uses `a = t/(1+t)`, `b = s/(1+s)` and the rank-one
/// identities `(tr X)² = tr X²`, `tr(YXY) = tr(XY²)`.
pub fn f_taylor(t: f64, s: f64, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let d = x.nrows();
    let tr = Traces::of(x, y);
    let a = t / (1.0 + t);
    let b = s / (1.0 + s);
    let bracket = 1.0 - 0.5 * (a + b) * tr.tr_x + 0.5 * a * b * tr.tr_y2
        + (0.375 * a * a + 0.375 * b * b + 0.25 * a * b) * tr.tr_x2
        - 0.5 * a * b * (a + b) * tr.tr_xy2
        + 0.25 * a * a * b * b * tr.tr_y4
        + 0.125 * a * a * b * b * tr.tr_y2 * tr.tr_y2
        - 0.25 * a * b * (a + b) * tr.tr_x * tr.tr_y2;
    eta(d, t) * eta(d, s) * bracket
}

/// The `(tr X)³` term of the next order, which dominates the Taylor
/// remainder when `X` and `Y` are scaled together.
pub fn f_taylor_cubic_x(t: f64, s: f64, x: &DMatrix<f64>) -> f64 {
    let d = x.nrows();
    let a = t / (1.0 + t);
    let b = s / (1.0 + s);
    let c = -(a.powi(3) + b.powi(3)) / 6.0
        - (a + b) * (a * a + b * b) / 8.0
        - (a + b).powi(3) / 48.0;
    let tr3 = (x * x * x).trace();
    eta(d, t) * eta(d, s) * c * tr3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Singularity {
    Regular,
    Positive,
    Negative,
}

impl Singularity {
    pub fn is_singular(self) -> bool {
        self != Singularity::Regular
    }
}

/// Positive-singular when more than `(1 − 1/(4d)) N` of the cosines
/// `cos(2πμ·x)` exceed `3/4`; negative-singular for the mirrored condition.
pub fn is_singular(set: &FrequencySet, x: &[f64]) -> Singularity {
    let threshold = (1.0 - 1.0 / (4.0 * set.d() as f64)) * set.n() as f64;
    let (mut above, mut below) = (0usize, 0usize);
    for &i in set.pair_representatives() {
        let t: f64 = set.point(i).iter().zip(x).map(|(&a, &b)| a as f64 * b).sum();
        let c = (2.0 * PI * (t - t.round())).cos();
        // μ and −μ share the cosine
        if c > SINGULAR_COS {
            above += 2;
        } else if c < -SINGULAR_COS {
            below += 2;
        }
    }
    if above as f64 > threshold {
        Singularity::Positive
    } else if below as f64 > threshold {
        Singularity::Negative
    } else {
        Singularity::Regular
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularMeasure {
    pub fraction: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Monte Carlo fraction of uniform points that are singular.
pub fn estimate_singular_measure(
    set: &FrequencySet,
    samples: u64,
    seed: u64,
) -> Result<SingularMeasure> {
    if samples < 1000 {
        return Err(Error::InsufficientData {
            needed: 1000,
            got: samples as usize,
        });
    }
    let d = set.d();
    let blocks = samples.div_ceil(MC_BLOCK as u64);
    let hits: Vec<u64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut g = rng::stream(seed, rng::domain::SINGULAR, b, 0);
            let count = (samples - b * MC_BLOCK as u64).min(MC_BLOCK as u64);
            let mut x = vec![0.0; d];
            let mut h = 0;
            for _ in 0..count {
                x.iter_mut().for_each(|c| *c = g.random());
                if is_singular(set, &x).is_singular() {
                    h += 1;
                }
            }
            h
        })
        .collect();
    let p = hits.iter().sum::<u64>() as f64 / samples as f64;
    Ok(SingularMeasure {
        fraction: p,
        std_error: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
    })
}

/// Point-level singular fraction on a midpoint grid with `per_axis^d` nodes.
pub fn singular_grid_fraction(set: &FrequencySet, per_axis: usize) -> f64 {
    let d = set.d();
    let total = per_axis.pow(d as u32);
    let hits: usize = (0..total)
        .into_par_iter()
        .filter(|&idx| {
            let mut rest = idx;
            let x: Vec<f64> = (0..d)
                .map(|_| {
                    let k = rest % per_axis;
                    rest /= per_axis;
                    (k as f64 + 0.5) / per_axis as f64
                })
                .collect();
            is_singular(set, &x).is_singular()
        })
        .count();
    hits as f64 / total as f64
}

/// Cube side `1/q` of the cube-level singular set, with `q = ⌈√m⌉`.
pub fn singular_cube_side(m: u64) -> u64 {
    let r = crate::lattice::isqrt(m);
    if r * r == m {
        r
    } else {
        r + 1
    }
}

/// Measure of the union of the `q^d` cubes (`q = ⌈√m⌉`) that contain a
/// singular node of a `sub^d` grid inside the cube, corners included.
pub fn singular_cube_measure(set: &FrequencySet, sub: usize) -> f64 {
    let d = set.d();
    let q = singular_cube_side(set.m()) as usize;
    let cubes = q.pow(d as u32);
    let nodes = (sub + 1).pow(d as u32);
    let singular: usize = (0..cubes)
        .into_par_iter()
        .filter(|&c| {
            let mut rest = c;
            let corner: Vec<usize> = (0..d)
                .map(|_| {
                    let k = rest % q;
                    rest /= q;
                    k
                })
                .collect();
            (0..nodes).any(|node| {
                let mut rest = node;
                let x: Vec<f64> = corner
                    .iter()
                    .map(|&k| {
                        let j = rest % (sub + 1);
                        rest /= sub + 1;
                        (k as f64 + j as f64 / sub as f64) / q as f64
                    })
                    .collect();
                is_singular(set, &x).is_singular()
            })
        })
        .count();
    singular as f64 / cubes as f64
}

/// Draws singular points by perturbing half-lattice centres
/// `h ∈ {0, 1/2}^d` on a scale `≍ 1/√m` and keeping accepted draws.
///
/// Index `i` always uses its own stream, so the output does not depend on
/// scheduling. Fails if some index exhausts `max_attempts`.
pub fn sample_singular_points(
    set: &FrequencySet,
    count: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<Vec<(Vec<f64>, Singularity)>> {
    let d = set.d();
    let scale = 0.25 / (set.m() as f64).sqrt();
    let draws: Vec<Option<(Vec<f64>, Singularity)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, rng::domain::SINGULAR, i as u64, 1);
            for _ in 0..max_attempts {
                let x: Vec<f64> = (0..d)
                    .map(|_| {
                        let centre = if g.random::<bool>() { 0.5 } else { 0.0 };
                        let v: f64 = centre + scale * (2.0 * g.random::<f64>() - 1.0);
                        v.rem_euclid(1.0)
                    })
                    .collect();
                let s = is_singular(set, &x);
                if s.is_singular() {
                    return Some((x, s));
                }
            }
            None
        })
        .collect();
    draws
        .into_iter()
        .map(|o| {
            o.ok_or(Error::BudgetExceeded {
                needed: max_attempts as u64 + 1,
                budget: max_attempts as u64,
            })
        })
        .collect()
}

/// Per-point `K2` record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct K2Diagnostic {
    pub x: Vec<f64>,
    pub r: f64,
    pub singular: Singularity,
    pub k2_mc: f64,
    pub k2_se: f64,
    /// `None` when the point is singular or `|r| ≥ 1 − 1/(16d)`.
    pub k2_series: Option<f64>,
    /// `(G_d²/4π²)(r⁶ + |tr X³| + |tr Y⁶|)`, in the same units as `K2`.
    pub eps_monitor: f64,
}

/// `G_d²/4π² · [1 + ½r² + ⅜r⁴ + Σ A_i (traces) + (A₁/2) r² tr X + (A₂/2) r² tr Y²]`.
pub fn k2_series(d: usize, r: f64, t: &Traces) -> Result<f64> {
    let a = expansion_coefficients(d)?;
    let g = g_constant(d);
    let f = |q: Rational| rational::to_f64(&q);
    let r2 = r * r;
    let bracket = series_bracket(&a, t)
        + 0.5 * r2
        + 0.375 * r2 * r2
        + 0.5 * f(a.a1) * r2 * t.tr_x
        + 0.5 * f(a.a2) * r2 * t.tr_y2;
    Ok(g * g / (4.0 * PI * PI) * bracket)
}

/// `K2` at `x` by Monte Carlo, plus the series where it applies.
pub fn k2_pointwise(
    set: &FrequencySet,
    x: &[f64],
    mc_samples: u64,
    seed: u64,
) -> Result<K2Diagnostic> {
    let d = set.d();
    let frame = eval_frame(set, x)?;
    let omega = OmegaMatrix::from_frame(&frame)?;
    let mc = mc_norm_product(&omega, mc_samples, seed)?;
    let r = frame.r;
    let denom = 2.0 * PI * (1.0 - r * r).sqrt();
    let singular = is_singular(set, x);
    let traces = Traces::of(&omega.x_block, &omega.y_block);
    let g = g_constant(d);
    let in_region = r.abs() < 1.0 - 1.0 / (16.0 * d as f64);
    let k2_series = if singular.is_singular() || !in_region {
        None
    } else {
        Some(k2_series(d, r, &traces)?)
    };
    Ok(K2Diagnostic {
        x: x.to_vec(),
        r,
        singular,
        k2_mc: mc.mean / denom,
        k2_se: mc.std_error / denom,
        k2_series,
        eps_monitor: g * g / (4.0 * PI * PI)
            * (r.powi(6) + traces.tr_x3.abs() + traces.tr_y6.abs()),
    })
}
