//! Torus integrals of the traces of `X`, `Y` and the assembled variance.
//!
//! Each trace integral is a fixed linear combination of the normalised
//! correlation-sum integrals, after truncating `1/(1−r²)` at first order.

use serde::Serialize;

use super::integrals::{IntegralSet, IntegralTag, Order6Status};
use crate::error::{Error, Result};
use crate::kacrice::expansion_coefficients;
use crate::predict::g_constant;
use crate::rational::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum LTag {
    #[serde(rename = "int_X")]
    X,
    #[serde(rename = "int_Y2")]
    Y2,
    #[serde(rename = "int_XY2")]
    XY2,
    #[serde(rename = "int_X2")]
    X2,
    #[serde(rename = "int_Y4")]
    Y4,
    #[serde(rename = "int_Y22")]
    Y22,
    #[serde(rename = "int_XtrY2")]
    XtrY2,
    #[serde(rename = "int_r2X")]
    R2X,
    #[serde(rename = "int_r2Y2")]
    R2Y2,
    #[serde(rename = "int_X3")]
    X3,
    #[serde(rename = "int_Y6")]
    Y6,
}

impl LTag {
    pub const ALL: [LTag; 11] = [
        LTag::X,
        LTag::Y2,
        LTag::XY2,
        LTag::X2,
        LTag::Y4,
        LTag::Y22,
        LTag::XtrY2,
        LTag::R2X,
        LTag::R2Y2,
        LTag::X3,
        LTag::Y6,
    ];

    /// `(coefficient, integral)` pairs with `d`-dependent coefficients.
    fn combination(self, d: i128) -> Vec<(i128, IntegralTag)> {
        use IntegralTag::*;
        match self {
            LTag::X => vec![(-d, IntDd), (-d, IntR2dd)],
            LTag::Y2 => vec![(d * d, IntH2), (2 * d * d, IntRdhd)],
            LTag::XY2 => vec![(-d.pow(3), IntDh2d)],
            LTag::X2 => vec![(d * d, IntDd2)],
            LTag::Y4 => vec![(d.pow(4), IntH4)],
            LTag::Y22 => vec![(d.pow(4), IntH22)],
            LTag::XtrY2 => vec![(-d.pow(3), IntDdh2)],
            LTag::R2X => vec![(-d, IntR2dd)],
            LTag::R2Y2 => vec![(d * d, IntR2h2)],
            LTag::X3 => vec![(-d.pow(3), IntDd3)],
            LTag::Y6 => vec![(d.pow(6), IntH6)],
        }
    }

    /// Main-term coefficients of `1/N` and `1/N²`.
    fn main_coefficients(self, d: i128) -> (Rational, Rational) {
        let z = Rational::from_integer(0);
        let q = Rational::from_integer;
        match self {
            LTag::X => (q(-d), q(-d)),
            LTag::Y2 => (q(d * d), q(-2 * d)),
            LTag::XY2 => (z, q(-d * d)),
            LTag::X2 => (z, q(d * (d + 2))),
            LTag::Y4 => (z, Rational::new(d.pow(3) * (2 * d + 7), d + 2)),
            LTag::Y22 => (z, Rational::new(d.pow(3) * (d * d + 2 * d + 6), d + 2)),
            LTag::XtrY2 => (z, q(-d.pow(3))),
            LTag::R2X => (z, q(-d)),
            LTag::R2Y2 => (z, q(d * (d + 2))),
            LTag::X3 | LTag::Y6 => (z, z),
        }
    }

    /// Terms whose main part uses `B_4` at its limit carry the extra
    /// equidistribution error `m^{−(d−3)/4}/N²`.
    fn uses_equidistribution(self) -> bool {
        matches!(self, LTag::Y4 | LTag::Y22)
    }

    pub fn main_term(self, d: usize, n: u64) -> Rational {
        let (a, b) = self.main_coefficients(d as i128);
        let n = n as i128;
        a / n + b / (n * n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LTerm {
    pub tag: LTag,
    #[serde(serialize_with = "rational::serialize_opt")]
    pub exact: Option<Rational>,
    #[serde(serialize_with = "rational::serialize")]
    pub main_term: Rational,
    #[serde(serialize_with = "rational::serialize_opt")]
    pub residual: Option<Rational>,
    /// `|X(4)|/N⁴ + R(6)`, plus `m^{−(d−3)/4}/N²` where the main term
    /// uses a limiting moment.
    pub error_scale: f64,
}

/// Cancellation of the `1/N` term and the `1/N²` constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerryCheck {
    pub d: usize,
    #[serde(serialize_with = "rational::serialize")]
    pub one_over_n: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub one_over_n2: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub expected_one_over_n2: Rational,
    pub holds: bool,
}

enum Source {
    Integral(IntegralTag),
    Trace(LTag),
}

/// The bracket `½r² + A₁X + A₂Y² + ⅜r⁴ + A₃XY² + A₄X² + A₅Y⁴ + A₆(trY²)²
/// + A₇ trX trY² + (A₁/2) r² trX + (A₂/2) r² trY²` as coefficient list.
fn bracket_terms(d: usize) -> Result<Vec<(Rational, Source)>> {
    let a = expansion_coefficients(d)?;
    let half = Rational::new(1, 2);
    Ok(vec![
        (half, Source::Integral(IntegralTag::IntR2)),
        (a.a1, Source::Trace(LTag::X)),
        (a.a2, Source::Trace(LTag::Y2)),
        (Rational::new(3, 8), Source::Integral(IntegralTag::IntR4)),
        (a.a3, Source::Trace(LTag::XY2)),
        (a.a4, Source::Trace(LTag::X2)),
        (a.a5, Source::Trace(LTag::Y4)),
        (a.a6, Source::Trace(LTag::Y22)),
        (a.a7, Source::Trace(LTag::XtrY2)),
        (a.a1 * half, Source::Trace(LTag::R2X)),
        (a.a2 * half, Source::Trace(LTag::R2Y2)),
    ])
}

pub fn berry_check(d: usize) -> Result<BerryCheck> {
    if d < 2 {
        return Err(Error::InvalidDimension { d, min: 2 });
    }
    let di = d as i128;
    let mut c1 = Rational::from_integer(0);
    let mut c2 = Rational::from_integer(0);
    for (coeff, src) in bracket_terms(d)? {
        let (a, b) = match src {
            Source::Integral(IntegralTag::IntR2) => (Rational::from_integer(1), Rational::from_integer(0)),
            Source::Integral(_) => (Rational::from_integer(0), Rational::from_integer(3)),
            Source::Trace(t) => t.main_coefficients(di),
        };
        c1 += coeff * a;
        c2 += coeff * b;
    }
    let expected = Rational::new(di - 1, (di + 2).pow(3));
    Ok(BerryCheck {
        d,
        holds: c1 == Rational::from_integer(0) && c2 == expected,
        one_over_n: c1,
        one_over_n2: c2,
        expected_one_over_n2: expected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralReport {
    pub d: usize,
    pub m: u64,
    pub n: u64,
    pub c4: u64,
    pub x4: u64,
    pub c6: Option<u64>,
    pub order6_status: Order6Status,
    pub integrals: Vec<super::integrals::ExactIntegral>,
    pub l_terms: Vec<LTerm>,
    pub berry: BerryCheck,
    /// Bracket assembled from the exact integrals.
    #[serde(serialize_with = "rational::serialize")]
    pub bracket: Rational,
    /// `(d−1)/((d+2)³ N²)`
    #[serde(serialize_with = "rational::serialize")]
    pub main_bracket: Rational,
    /// `(m G_d²/d) · bracket`
    pub variance_assembled: f64,
    pub variance_main: f64,
}

/// Trace integrals, residuals against their main terms, and the assembled
/// variance. `R(6)` falls back to the diagonal proxy `15/N³` when `C(6)`
/// was not computed.
pub fn assemble_l_integrals(set: &IntegralSet) -> Result<IntegralReport> {
    let (d, m, n) = (set.d, set.m, set.n);
    let di = d as i128;
    let nf = n as f64;
    let x4 = crate::correlations::decompose_from_count(n, set.c4)?.x4;
    let r6 = match set.c6 {
        Some(c6) => c6 as f64 / nf.powi(6),
        None => 15.0 / nf.powi(3),
    };
    let base_scale = x4 as f64 / nf.powi(4) + r6;
    let equi = (m as f64).powf(-(d as f64 - 3.0) / 4.0) / (nf * nf);

    let l_terms: Vec<LTerm> = LTag::ALL
        .into_iter()
        .map(|tag| {
            let exact = tag
                .combination(di)
                .into_iter()
                .try_fold(Rational::from_integer(0), |acc, (c, it)| {
                    set.value(it).map(|v| acc + v * c)
                });
            let main_term = tag.main_term(d, n);
            LTerm {
                tag,
                residual: exact.map(|e| e - main_term),
                exact,
                main_term,
                error_scale: base_scale + if tag.uses_equidistribution() { equi } else { 0.0 },
            }
        })
        .collect();

    let mut bracket = Rational::from_integer(0);
    for (coeff, src) in bracket_terms(d)? {
        let v = match src {
            Source::Integral(t) => set.value(t),
            Source::Trace(t) => l_terms.iter().find(|l| l.tag == t).and_then(|l| l.exact),
        }
        .ok_or_else(|| Error::InvalidArgument("missing order-four integral".into()))?;
        bracket += coeff * v;
    }
    let ni = n as i128;
    let main_bracket = Rational::new(di - 1, (di + 2).pow(3) * ni * ni);
    let prefactor = m as f64 * g_constant(d).powi(2) / d as f64;

    Ok(IntegralReport {
        d,
        m,
        n,
        c4: set.c4,
        x4,
        c6: set.c6,
        order6_status: set.order6_status,
        integrals: set.integrals.clone(),
        l_terms,
        berry: berry_check(d)?,
        variance_assembled: prefactor * rational::to_f64(&bracket),
        variance_main: prefactor * rational::to_f64(&main_bracket),
        bracket,
        main_bracket,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_frequencies, EnumerationMode};
    use crate::spectral::{all_exact_integrals, TupleMaterials};

    #[test]
    fn berry_cancellation_for_small_dimensions() {
        for d in 2..=12 {
            let b = berry_check(d).unwrap();
            assert!(b.holds, "d = {d}: {:?}", b);
        }
        assert_eq!(berry_check(4).unwrap().one_over_n2, Rational::new(1, 72));
    }

    #[test]
    fn bracket_has_no_one_over_n_part() {
        let s = enumerate_frequencies(4, 9, EnumerationMode::Strict).unwrap();
        let mat = TupleMaterials::build(&s, 1 << 24).unwrap();
        let report = assemble_l_integrals(&all_exact_integrals(&s, &mat, None).unwrap()).unwrap();
        // the bracket is O(1/N²): compare against the main term
        let ratio = rational::to_f64(&report.bracket) / rational::to_f64(&report.main_bracket);
        assert!(ratio.abs() < 10.0, "ratio {ratio}");
        assert!(report.l_terms.iter().filter(|l| l.exact.is_some()).count() == 9);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["l_terms"][0]["tag"], "int_X");
    }
}
