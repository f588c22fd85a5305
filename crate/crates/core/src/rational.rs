//! Exact rational helpers on top of `num_rational::BigRational`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn to_f64(r: &Rational) -> f64 {
    // BigRational::to_f64 handles huge numerators/denominators without overflow.
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact conversion of a finite double into a rational (every double is dyadic).
pub fn from_f64(v: f64) -> Result<Rational> {
    Rational::from_float(v).ok_or_else(|| Error::Invalid(format!("non-finite value {v}")))
}

/// Formats as `"num/den"`, or `"num"` when the denominator is one.
pub fn fmt(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Invalid(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => {
            let n: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(n))
        }
    }
}

pub fn is_integer(r: &Rational) -> bool {
    r.denom().is_one()
}

pub fn lcm_u64(a: u64, b: u64) -> u64 {
    a.lcm(&b)
}

/// Denominator as `u64`; exponents in this crate always have small denominators.
pub fn denom_u64(r: &Rational) -> u64 {
    r.denom().to_u64().expect("exponent denominator exceeds u64")
}

/// Falling factorial `v (v-1) ... (v-k+1)` for a rational `v`.
pub fn falling(v: &Rational, k: u32) -> Rational {
    let mut acc = Rational::one();
    let mut cur = v.clone();
    for _ in 0..k {
        acc *= &cur;
        cur -= Rational::one();
    }
    acc
}

/// Largest power of two `2^-k` (k >= 0) that is `<= v`, for positive `v`.
pub fn dyadic_floor(v: f64) -> Rational {
    let mut k = 0i32;
    while 2f64.powi(-k) > v && k < 200 {
        k += 1;
    }
    Rational::new(BigInt::one(), BigInt::one() << k as usize)
}

/// Serde adapter storing a rational as its `"num/den"` string.
pub mod as_string {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        fmt(r).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}

pub mod opt_as_string {
    use super::*;

    pub fn serialize<S: Serializer>(
        r: &Option<Rational>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        r.as_ref().map(fmt).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<Rational>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| parse(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub mod vec_as_string {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(fmt).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Rational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_and_parse() {
        assert_eq!(fmt(&rat(4, 3)), "4/3");
        assert_eq!(fmt(&rat(-6, 3)), "-2");
        assert_eq!(parse(" 8/6 ").unwrap(), rat(4, 3));
        assert!(parse("1/0").is_err());
        assert!(parse("x").is_err());
    }

    #[test]
    fn falling_factorial() {
        assert_eq!(falling(&int(5), 3), int(60));
        assert_eq!(falling(&rat(1, 2), 2), rat(-1, 4));
        assert_eq!(falling(&int(2), 3), int(0));
    }

    #[test]
    fn dyadic() {
        assert_eq!(dyadic_floor(0.125), rat(1, 8));
        assert_eq!(dyadic_floor(0.2), rat(1, 8));
        assert_eq!(dyadic_floor(3.0), int(1));
    }
}
