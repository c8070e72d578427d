//! Exact rationals and their `{num, den}` record form.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An exact rational serialized as `{"num": .., "den": ..}`.
///
/// Components that fit in an `i64` are written as JSON integers, larger ones
/// as decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub BigRational);

impl Exact {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        Exact(BigRational::new(num.into(), den.into()))
    }

    pub fn integer(n: impl Into<BigInt>) -> Self {
        Exact(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        Exact(BigRational::zero())
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Decimal rendering with `digits` fractional digits (display only).
    pub fn to_decimal(&self, digits: usize) -> String {
        let scale = BigInt::from(10).pow(digits as u32);
        let scaled = &self.0 * BigRational::from_integer(scale.clone());
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let rounded = if scaled.is_negative() {
            -((-scaled + half).floor())
        } else {
            (scaled + half).floor()
        };
        let n = rounded.to_integer();
        let negative = n.is_negative();
        let digits_str = n.abs().to_string();
        let digits_str = format!("{:0>width$}", digits_str, width = digits + 1);
        let (int, frac) = digits_str.split_at(digits_str.len() - digits);
        let sign = if negative { "-" } else { "" };
        if digits == 0 {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac}")
        }
    }
}

impl From<BigRational> for Exact {
    fn from(r: BigRational) -> Self {
        Exact(r)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

/// Parses `3`, `-3/4` or a terminating decimal such as `0.9` exactly.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let text = text.trim();
    let bad = || Error::Malformed(format!("`{text}` is not a rational number"));
    if let Some((n, d)) = text.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.trim_start().starts_with('-');
        let int_part = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            BigInt::from_str(int).map_err(|_| bad())?
        };
        let frac_val = if frac.is_empty() {
            BigInt::zero()
        } else {
            BigInt::from_str(frac).map_err(|_| bad())?
        };
        let scale = BigInt::from(10).pow(frac.len() as u32);
        let frac_r = BigRational::new(frac_val, scale);
        let int_r = BigRational::from_integer(int_part);
        return Ok(if negative { int_r - frac_r } else { int_r + frac_r });
    }
    Ok(BigRational::from_integer(BigInt::from_str(text).map_err(|_| bad())?))
}

fn int_to_json(n: &BigInt) -> serde_json::Value {
    match n.to_i64() {
        Some(v) => serde_json::Value::from(v),
        None => serde_json::Value::from(n.to_string()),
    }
}

fn json_to_int(v: &serde_json::Value) -> Option<BigInt> {
    match v {
        serde_json::Value::Number(n) => n.as_i64().map(BigInt::from),
        serde_json::Value::String(s) => BigInt::from_str(s).ok(),
        _ => None,
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Exact", 2)?;
        s.serialize_field("num", &int_to_json(self.0.numer()))?;
        s.serialize_field("den", &int_to_json(self.0.denom()))?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            num: serde_json::Value,
            den: serde_json::Value,
        }
        let raw = Raw::deserialize(deserializer)?;
        let num = json_to_int(&raw.num).ok_or_else(|| de::Error::custom("bad numerator"))?;
        let den = json_to_int(&raw.den).ok_or_else(|| de::Error::custom("bad denominator"))?;
        if den.is_zero() {
            return Err(de::Error::custom("zero denominator"));
        }
        Ok(Exact(BigRational::new(num, den)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_rational("0.9").unwrap(), BigRational::new(9.into(), 10.into()));
        assert_eq!(parse_rational("-3/4").unwrap(), BigRational::new((-3).into(), 4.into()));
        assert_eq!(parse_rational("2").unwrap(), BigRational::from_integer(2.into()));
        assert_eq!(
            parse_rational("-0.25").unwrap(),
            BigRational::new((-1).into(), 4.into())
        );
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn record_form() {
        let e = Exact::new(5, 4);
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, r#"{"num":5,"den":4}"#);
        let back: Exact = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
        let big = Exact::new(BigInt::from(2).pow(80), 3);
        let back: Exact = serde_json::from_str(&serde_json::to_string(&big).unwrap()).unwrap();
        assert_eq!(back, big);
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(Exact::new(129, 128).to_decimal(12), "1.007812500000");
        assert_eq!(Exact::new(-1, 3).to_decimal(4), "-0.3333");
        assert_eq!(Exact::new(2, 3).to_decimal(2), "0.67");
    }
}
