//! Exact rational scalars.
//!
//! Supports, plans and interval endpoints are decided by exact comparisons, so
//! every exact computation in the crate runs on arbitrary precision rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{OtError, Result};

pub type Scalar = BigRational;

pub fn int(value: i64) -> Scalar {
    Scalar::from_integer(BigInt::from(value))
}

pub fn ratio(numer: i64, denom: i64) -> Scalar {
    Scalar::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses `"3"`, `"-7/4"`, `"0.25"` or `"1.5e-3"` into an exact rational.
///
/// Decimal strings are read digit by digit, so `"0.1"` is exactly `1/10`.
pub fn parse(text: &str) -> Result<Scalar> {
    let s = text.trim();
    let err = || OtError::Parse(text.to_string());
    if s.is_empty() {
        return Err(err());
    }
    if let Some((numer, denom)) = s.split_once('/') {
        let numer: BigInt = numer.trim().parse().map_err(|_| err())?;
        let denom: BigInt = denom.trim().parse().map_err(|_| err())?;
        if denom.is_zero() {
            return Err(err());
        }
        return Ok(Scalar::new(numer, denom));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().map_err(|_| err())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer: BigInt = all_digits.parse().map_err(|_| err())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = Scalar::from_integer(numer);
    if scale >= 0 {
        value *= Scalar::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Scalar::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if negative { -value } else { value })
}

/// Canonical text form: `"p/q"` in lowest terms, or `"p"` for integers.
pub fn format(value: &Scalar) -> String {
    value.to_string()
}

pub fn to_f64(value: &Scalar) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        // Very large numerators and denominators: divide in floating point.
        let n = value.numer().to_f64().unwrap_or(f64::NAN);
        let d = value.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact rational value of a finite float.
pub fn from_f64(value: f64) -> Result<Scalar> {
    Scalar::from_float(value).ok_or_else(|| OtError::Parse(value.to_string()))
}

pub fn min<'a>(values: impl IntoIterator<Item = &'a Scalar>) -> Option<Scalar> {
    values.into_iter().min().cloned()
}

pub fn sum<'a>(values: impl IntoIterator<Item = &'a Scalar>) -> Scalar {
    values.into_iter().fold(Scalar::zero(), |acc, v| acc + v)
}

pub fn dot(a: &[Scalar], b: &[Scalar]) -> Scalar {
    a.iter().zip(b).fold(Scalar::zero(), |acc, (x, y)| acc + x * y)
}

pub fn is_probability_vector(weights: &[Scalar]) -> bool {
    weights.iter().all(|w| w.is_positive()) && sum(weights) == Scalar::one()
}
