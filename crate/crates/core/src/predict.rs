//! Closed-form predictions for the nodal volume and the bound ladder.
//!
//! Every `≪` bound is reported with implied constant 1 and `ε = 0`. Those
//! numbers are shapes for comparison, not certified bounds.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::correlations::CorrelationCensus;
use crate::error::{Error, Result};

/// `G_d = √(4π) Γ((d+1)/2) / Γ(d/2)`.
pub fn g_constant(d: usize) -> f64 {
    let d = d as f64;
    (4.0 * std::f64::consts::PI).sqrt() * (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp()
}

/// Expected nodal volume `G_d √(m/d)`.
pub fn expected_volume(d: usize, m: u64) -> f64 {
    g_constant(d) * (m as f64 / d as f64).sqrt()
}

/// Power-saving exponent: `2/(d−1)` at `d = 4`, `2/(d−2)` for `d ≥ 5`.
pub fn alpha(d: usize) -> Option<f64> {
    match d {
        4 => Some(2.0 / 3.0),
        d if d >= 5 => Some(2.0 / (d as f64 - 2.0)),
        _ => None,
    }
}

/// `(d−1) / (d (d+2)³) · G_d²`, the constant in front of `m/N²`.
///
/// At `d = 2, 3` this reproduces the known constants `G_2²/128` and `2G_3²/375`.
pub fn main_term_constant(d: usize) -> f64 {
    let df = d as f64;
    (df - 1.0) / (df * (df + 2.0).powi(3)) * g_constant(d).powi(2)
}

/// Variance constant for `d = 2`, for cross-checking only.
pub fn c2_constant() -> f64 {
    g_constant(2).powi(2) / 128.0
}

/// Variance constant for `d = 3`, for cross-checking only.
pub fn c3_constant() -> f64 {
    2.0 * g_constant(3).powi(2) / 375.0
}

/// One term of the error budget in the variance expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetTerm {
    pub name: &'static str,
    /// Term inside the bracket multiplying `m/N²`, or `None` if unavailable.
    pub relative: Option<f64>,
    /// `relative · m/N²`.
    pub absolute: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariancePrediction {
    pub d: usize,
    pub m: u64,
    pub n: u64,
    pub g_d: f64,
    pub expected_volume: f64,
    pub main_term_constant: f64,
    /// `main_term_constant · m/N²`
    pub main_term: f64,
    /// `m/√N`
    pub rw_bound: f64,
    /// `m/N`
    pub conjecture_bound: f64,
    /// `1 + α(d)`, the power of `N` saved in `m N^{−1−α(d)+ε}`.
    pub thm_exponent: Option<f64>,
    /// `m N^{−1−α(d)}` with constant 1 and `ε = 0`.
    pub thm_bound_shape: Option<f64>,
    pub error_budget: Vec<BudgetTerm>,
    pub note: &'static str,
}

pub fn variance_prediction(census: &CorrelationCensus) -> Result<VariancePrediction> {
    let (d, m, n) = (census.d, census.m, census.n);
    if n == 0 {
        return Err(Error::Mismatch("empty census".into()));
    }
    let nf = n as f64;
    let mf = m as f64;
    let scale = mf / (nf * nf);
    let c = main_term_constant(d);
    let a = alpha(d);

    let term = |name, relative: Option<f64>| BudgetTerm {
        name,
        relative,
        absolute: relative.map(|r| r * scale),
    };
    let error_budget = vec![
        term(
            "equidistribution m^-(d-3)/4",
            Some(mf.powf(-(d as f64 - 3.0) / 4.0)),
        ),
        term("non-degenerate |X(4)|/N^2", Some(census.x4 as f64 / (nf * nf))),
        term(
            "six-correlations |C(6)|/N^4",
            census.c6.map(|c6| c6 as f64 / nf.powi(4)),
        ),
    ];

    Ok(VariancePrediction {
        d,
        m,
        n,
        g_d: g_constant(d),
        expected_volume: expected_volume(d, m),
        main_term_constant: c,
        main_term: c * scale,
        rw_bound: mf / nf.sqrt(),
        conjecture_bound: mf / nf,
        thm_exponent: a.map(|a| 1.0 + a),
        thm_bound_shape: a.map(|a| mf * nf.powf(-1.0 - a)),
        error_budget,
        note: "bounds use implied constant 1 and epsilon 0; shape values only",
    })
}
