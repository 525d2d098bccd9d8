//! The covariance function `r(x) = (1/N) Σ e(μ·x)`, its gradient `D` and
//! Hessian `H`, and the derived matrices `X`, `Y` of the two-point expansion.

mod assembly;
mod integrals;

pub use assembly::{
    assemble_l_integrals, berry_check, BerryCheck, IntegralReport, LTag, LTerm,
};
pub use integrals::{
    all_exact_integrals, exact_integral, ExactIntegral, IntegralSet, IntegralTag, Order6Status,
    TupleMaterials,
};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::FrequencySet;

/// Frames with `|r| ≥ 1 − DEGENERATE_TOL` carry no `X`, `Y`.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// `E = 4π²m`.
pub fn energy(m: u64) -> f64 {
    4.0 * PI * PI * m as f64
}

/// `(μ·x) mod 1`, reduced to `[-1/2, 1/2]` before any trigonometry.
fn reduced_phase(mu: &[i64], x: &[f64]) -> f64 {
    let t: f64 = mu.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum();
    t - t.round()
}

/// `r`, `D`, `H` at one point, plus `X`, `Y` where `|r| < 1`.
///
/// `D = −(2π/N) Σ sin(2πμ·x) μ` is the real gradient; the cosine part of
/// `(2πi/N) Σ e(μ·x) μ` cancels over antipodal pairs, so every even power of
/// `D` in the correlation-sum identities agrees with this real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub x: Vec<f64>,
    pub m: u64,
    pub r: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    pub x_mat: Option<DMatrix<f64>>,
    pub y_mat: Option<DMatrix<f64>>,
}

pub fn eval_frame(set: &FrequencySet, x: &[f64]) -> Result<SpectralFrame> {
    let d = set.d();
    if x.len() != d {
        return Err(Error::Mismatch(format!(
            "point has {} coordinates, set has d = {d}",
            x.len()
        )));
    }
    let n = set.n() as f64;
    let mut cos_sum = 0.0;
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    for &i in set.pair_representatives() {
        let mu = set.point(i);
        let (s, c) = (2.0 * PI * reduced_phase(mu, x)).sin_cos();
        cos_sum += c;
        for a in 0..d {
            let ma = mu[a] as f64;
            grad[a] += s * ma;
            for b in a..d {
                hess[(a, b)] += c * ma * mu[b] as f64;
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            hess[(a, b)] = hess[(b, a)];
        }
    }
    // each pair contributes twice
    let r = 2.0 * cos_sum / n;
    grad *= -2.0 * 2.0 * PI / n;
    hess *= -2.0 * 4.0 * PI * PI / n;

    let (x_mat, y_mat) = if r.abs() < 1.0 - DEGENERATE_TOL {
        let scale = -(d as f64) / energy(set.m());
        let outer = &grad * grad.transpose();
        let q = 1.0 - r * r;
        let xm = &outer * (scale / q);
        let ym = (&hess + &outer * (r / q)) * scale;
        (Some(xm), Some(ym))
    } else {
        (None, None)
    };

    Ok(SpectralFrame {
        x: x.to_vec(),
        m: set.m(),
        r,
        grad,
        hess,
        x_mat,
        y_mat,
    })
}

/// `Σ e(μ·x) / N` summed over every point as a complex number `(re, im)`.
///
/// Independent of the paired-cosine path in [`eval_frame`].
pub fn covariance_complex(set: &FrequencySet, x: &[f64]) -> (f64, f64) {
    let n = set.n() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for mu in set.points() {
        let t: f64 = mu.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum();
        let z = nalgebra::Complex::new(0.0, 2.0 * PI * t).exp();
        re += z.re;
        im += z.im;
    }
    (re / n, im / n)
}

/// Traces of `X` and `Y` that enter the norm-product expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Traces {
    pub tr_x: f64,
    pub tr_x2: f64,
    pub tr_x3: f64,
    pub tr_y2: f64,
    pub tr_y4: f64,
    pub tr_y6: f64,
    pub tr_xy2: f64,
}

impl Traces {
    pub fn of(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Self {
        let x2 = x * x;
        let y2 = y * y;
        let y4 = &y2 * &y2;
        Traces {
            tr_x: x.trace(),
            tr_x2: x2.trace(),
            tr_x3: (&x2 * x).trace(),
            tr_y2: y2.trace(),
            tr_y4: y4.trace(),
            tr_y6: (&y4 * &y2).trace(),
            tr_xy2: (x * &y2).trace(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_frequencies, EnumerationMode};
    use crate::rng;
    use rand::Rng;

    fn set(d: usize, m: u64) -> FrequencySet {
        enumerate_frequencies(d, m, EnumerationMode::Strict).unwrap()
    }

    #[test]
    fn frame_at_origin() {
        let s = set(4, 5);
        let f = eval_frame(&s, &[0.0; 4]).unwrap();
        assert!((f.r - 1.0).abs() < 1e-15);
        assert!(f.grad.norm() < 1e-12);
        assert!(f.x_mat.is_none() && f.y_mat.is_none());
        // Σ μᵗμ = (mN/d) I by the coordinate symmetries of E
        let expected = -4.0 * PI * PI * 5.0 / 4.0;
        for a in 0..4 {
            assert!((f.hess[(a, a)] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn hessian_trace_and_complex_path() {
        let s = set(4, 5);
        let mut g = rng::stream(3, rng::domain::POINTS, 0, 0);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| g.random::<f64>()).collect();
            let f = eval_frame(&s, &x).unwrap();
            let tr = f.hess.trace();
            assert!((tr + energy(5) * f.r).abs() < 1e-9);
            let (re, im) = covariance_complex(&s, &x);
            assert!((re - f.r).abs() < 1e-12);
            assert!(im.abs() < 1e-12);
            assert!(f.r.abs() <= 1.0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = set(5, 3);
        let x = [0.13, 0.71, 0.42, 0.05, 0.88];
        let f = eval_frame(&s, &x).unwrap();
        let h = 1e-6;
        for a in 0..5 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let fd = (eval_frame(&s, &xp).unwrap().r - eval_frame(&s, &xm).unwrap().r) / (2.0 * h);
            assert!((fd - f.grad[a]).abs() < 1e-6, "{fd} vs {}", f.grad[a]);
            let fd_row = (eval_frame(&s, &xp).unwrap().grad - eval_frame(&s, &xm).unwrap().grad)
                / (2.0 * h);
            for b in 0..5 {
                assert!((fd_row[b] - f.hess[(a, b)]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn x_is_rank_one() {
        let s = set(4, 9);
        let mut g = rng::stream(5, rng::domain::POINTS, 1, 0);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| g.random::<f64>()).collect();
            let f = eval_frame(&s, &x).unwrap();
            let xm = f.x_mat.unwrap();
            let ym = f.y_mat.unwrap();
            let t = Traces::of(&xm, &ym);
            assert!((t.tr_x * t.tr_x - t.tr_x2).abs() < 1e-10);
            let sv = xm.clone().singular_values();
            let mut sv: Vec<f64> = sv.iter().copied().collect();
            sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert!(sv[1] < 1e-12 * sv[0].max(1.0));
            let yxy = (&ym * &xm * &ym).trace();
            assert!((yxy - t.tr_xy2).abs() < 1e-10);
            assert!((xm.clone() - xm.transpose()).norm() < 1e-14);
            assert!((ym.clone() - ym.transpose()).norm() < 1e-12);
        }
    }
}
