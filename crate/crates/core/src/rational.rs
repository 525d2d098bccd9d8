//! Exact rationals over `i128` and their JSON form.

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::ser::SerializeTuple;
use serde::Serializer;

use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64()
        .unwrap_or_else(|| *q.numer() as f64 / *q.denom() as f64)
}

/// `num / den` with a zero-denominator guard.
pub fn ratio(num: i128, den: i128) -> Result<Rational> {
    if den == 0 {
        return Err(Error::InvalidArgument("zero denominator".into()));
    }
    Ok(Rational::new(num, den))
}

pub fn checked_pow(base: i128, exp: u32) -> Result<i128> {
    base.checked_pow(exp).ok_or(Error::Overflow("integer power"))
}

/// Serialises a rational as `[numerator, denominator]`.
pub fn serialize<S: Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(q.numer())?;
    t.serialize_element(q.denom())?;
    t.end()
}

pub fn serialize_opt<S: Serializer>(
    q: &Option<Rational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match q {
        Some(q) => serialize(q, s),
        None => s.serialize_none(),
    }
}
