//! Exact rational scalars and prices.
//!
//! All costs and prices in this crate are exact rationals; the instance
//! families we work with decide ties by amounts like 1/2, so floating point
//! is banned from every computation that feeds a comparison. `INF` is a
//! price-only value: an edge priced `INF` is treated as deleted.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::fmt;
use thiserror::Error;

/// Exact rational scalar. `BigRational` keeps values in lowest terms with a
/// positive denominator, which is exactly the canonical form we serialize.
pub type Rat = BigRational;

pub fn rat_int(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat(numer: i64, denom: i64) -> Rat {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScalarParseError {
    #[error("empty value")]
    Empty,
    #[error("malformed rational `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Parses `123` or `a/b`. Signs are accepted here; nonnegativity is a
/// per-field validation concern, not a lexical one.
pub fn parse_rat(text: &str) -> Result<Rat, ScalarParseError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ScalarParseError::Empty);
    }
    let mut parts = text.splitn(2, '/');
    let numer_text = parts.next().unwrap();
    let numer: BigInt = numer_text
        .parse()
        .map_err(|_| ScalarParseError::Malformed(text.to_string()))?;
    match parts.next() {
        None => Ok(BigRational::from_integer(numer)),
        Some(denom_text) => {
            let denom: BigInt = denom_text
                .parse()
                .map_err(|_| ScalarParseError::Malformed(text.to_string()))?;
            if denom.is_zero() {
                return Err(ScalarParseError::ZeroDenominator(text.to_string()));
            }
            Ok(BigRational::new(numer, denom))
        }
    }
}

/// Canonical text form: plain integer when the denominator is one,
/// `numer/denom` in lowest terms otherwise.
pub fn fmt_rat(value: &Rat) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// A price for a variable edge: a finite nonnegative rational or infinity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Price {
    Finite(Rat),
    Inf,
}

impl Price {
    pub fn is_inf(&self) -> bool {
        matches!(self, Price::Inf)
    }

    pub fn finite(&self) -> Option<&Rat> {
        match self {
            Price::Finite(v) => Some(v),
            Price::Inf => None,
        }
    }

    pub fn parse(text: &str) -> Result<Price, ScalarParseError> {
        if text.trim() == "inf" {
            Ok(Price::Inf)
        } else {
            parse_rat(text).map(Price::Finite)
        }
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Price::Finite(v) => write!(f, "{}", fmt_rat(v)),
            Price::Inf => write!(f, "inf"),
        }
    }
}

pub fn is_nonnegative(value: &Rat) -> bool {
    !value.is_negative()
}

/// Exact ceiling of `value * m` as a usize, for window sizes like ⌈δM⌉.
pub fn ceil_mul(value: &Rat, m: usize) -> usize {
    use num::ToPrimitive;
    let scaled = value * BigRational::from_integer(BigInt::from(m));
    let ceiled = scaled.ceil();
    ceiled
        .to_integer()
        .to_usize()
        .expect("ceiling fits in usize")
}
