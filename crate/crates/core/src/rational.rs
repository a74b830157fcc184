//! Exact rational scalars used throughout the metric kernel.

use num_rational::Ratio;
use num_traits::{One, Zero};
use std::fmt;

/// Exact rational number. Every edge parameter, radius and weight uses this.
pub type Q = Ratio<i64>;

pub fn q(numer: i64, denom: i64) -> Q {
    Q::new(numer, denom)
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(n)
}

pub fn is_unit_interval(t: &Q) -> bool {
    *t >= Q::zero() && *t <= Q::one()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRationalError(pub String);

impl fmt::Display for ParseRationalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot parse rational from {:?}", self.0)
    }
}

impl std::error::Error for ParseRationalError {}

/// Parses `"p/q"` or `"p"`.
pub fn parse_q(s: &str) -> Result<Q, ParseRationalError> {
    let err = || ParseRationalError(s.to_owned());
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().map_err(|_| err())?;
            let d: i64 = d.trim().parse().map_err(|_| err())?;
            if d == 0 {
                return Err(err());
            }
            Ok(Q::new(n, d))
        }
        None => s.parse::<i64>().map(Q::from_integer).map_err(|_| err()),
    }
}

pub fn format_q(v: &Q) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

pub fn serialize_q_vec<S: serde::Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(format_q))
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod serde_q {
    use super::{format_q, parse_q, Q};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_q(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            Int(i64),
        }
        match Raw::deserialize(d)? {
            Raw::Str(s) => parse_q(&s).map_err(de::Error::custom),
            Raw::Int(n) => Ok(Q::from_integer(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_q("3/6").unwrap(), q(1, 2));
        assert_eq!(parse_q(" 7 ").unwrap(), qi(7));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("x").is_err());
        assert_eq!(format_q(&q(2, 4)), "1/2");
        assert_eq!(format_q(&qi(-3)), "-3");
    }
}
