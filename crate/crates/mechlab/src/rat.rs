//! Exact rationals and their text form.
//!
//! Every value and payment in the crate is a [`Rat`]. The text form is
//! `"p/q"` in lowest terms, or a plain integer when the denominator is 1.
//! Parsing also accepts finite decimals such as `"0.125"`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::Error;

/// Arbitrary-precision rational, always kept in reduced form.
pub type Rat = BigRational;

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn frac(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

pub fn zero() -> Rat {
    Rat::zero()
}

pub fn one() -> Rat {
    Rat::one()
}

/// `base^exp` as an exact rational.
pub fn pow(base: i64, exp: u32) -> Rat {
    Rat::from_integer(BigInt::from(base).pow(exp))
}

pub fn to_text(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse(s: &str) -> Result<Rat, Error> {
    let t = s.trim();
    let bad = || Error::Input(format!("not a rational: {s:?}"));
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Input(format!("zero denominator in {s:?}")));
        }
        return Ok(Rat::new(p, q));
    }
    if let Some((whole, fracpart)) = t.split_once('.') {
        if fracpart.is_empty() || !fracpart.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = whole.starts_with('-');
        let w: BigInt = if whole.is_empty() || whole == "-" {
            BigInt::zero()
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let scale = BigInt::from(10u32).pow(fracpart.len() as u32);
        let f: BigInt = fracpart.parse().map_err(|_| bad())?;
        let mag = w.abs() * &scale + f;
        let numer = if neg { -mag } else { mag };
        return Ok(Rat::new(numer, scale));
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(Rat::from_integer(n))
}

/// Bit length of numerator plus bit length of denominator.
pub fn bit_size(r: &Rat) -> u64 {
    r.numer().bits() + r.denom().bits()
}

/// Floor of a rational.
pub fn floor(r: &Rat) -> BigInt {
    r.numer().div_floor(r.denom())
}

/// Ceiling of log2 of a positive count, with `ceil_log2(1) == 0`.
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Serde adapter storing a [`Rat`] as its text form.
pub mod text {
    use super::Rat;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::to_text(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        super::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<Rat>` as a list of text forms.
pub mod text_vec {
    use super::Rat;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&super::to_text(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| super::parse(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        for s in ["0", "7", "-3/4", "65/16", "1171875"] {
            assert_eq!(to_text(&parse(s).unwrap()), s);
        }
    }

    #[test]
    fn parses_decimals_and_reduces() {
        assert_eq!(parse("0.125").unwrap(), frac(1, 8));
        assert_eq!(parse("-1.5").unwrap(), frac(-3, 2));
        assert_eq!(parse("6/4").unwrap(), frac(3, 2));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
        assert!(parse("1.").is_err());
    }

    #[test]
    fn ceil_log2_small() {
        let got: Vec<u32> = [1u64, 2, 3, 4, 5, 12, 17].iter().map(|&n| ceil_log2(n)).collect();
        assert_eq!(got, vec![0, 1, 2, 2, 3, 4, 5]);
    }

    #[test]
    fn bit_size_counts_both_parts() {
        assert_eq!(bit_size(&frac(1, 2)), 3);
        assert_eq!(bit_size(&int(255)), 9);
    }
}
