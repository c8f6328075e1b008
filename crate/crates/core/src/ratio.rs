//! Exact rationals for scores, thresholds and ratios.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rust_decimal::Decimal;

pub type Rational = BigRational;

pub fn ratio(numer: u64, denom: u64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn from_decimal(d: Decimal) -> Rational {
    let scale = BigInt::from(10u32).pow(d.scale());
    Rational::new(BigInt::from(d.mantissa()), scale)
}

/// Parse a plain decimal literal (`0.5`, `1`, `.75`) exactly.
pub fn parse_decimal(s: &str) -> Option<Rational> {
    let s = s.trim();
    let s = if s.starts_with('.') { format!("0{s}") } else { s.to_string() };
    Decimal::from_str_exact(&s).ok().map(from_decimal)
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// True when `0 < r <= 1`.
pub fn is_unit_interval(r: &Rational) -> bool {
    *r > Rational::zero() && *r <= Rational::one()
}

/// Serde adapter: a rational as its `p/q` string.
pub mod serde_str {
    use super::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(r)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub mod serde_opt_str {
    use super::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.collect_str(r),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}
