//! Exact rational scalars and their "p/q" string form used by every schema.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::str::FromStr;

pub type Rat = num_rational::BigRational;

pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

pub fn rint(p: i64) -> Rat {
    Rat::from_integer(BigInt::from(p))
}

/// Renders a rational as `p` or `p/q` with q > 0 and gcd(p, q) = 1.
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p` or `p/q`; whitespace is not tolerated, q must be nonzero.
pub fn rat_from_string(s: &str) -> Result<Rat, String> {
    let body = s.trim();
    let (ns, ds) = match body.split_once('/') {
        Some((n, d)) => (n, d),
        None => (body, "1"),
    };
    let n = BigInt::from_str(ns).map_err(|e| format!("bad numerator {ns:?}: {e}"))?;
    let d = BigInt::from_str(ds).map_err(|e| format!("bad denominator {ds:?}: {e}"))?;
    if d.is_zero() {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(Rat::new(n, d))
}

/// Factorial as a rational (exact).
pub fn factorial(n: u32) -> Rat {
    let mut acc = BigInt::one();
    for k in 2..=n as u64 {
        acc *= k;
    }
    Rat::from_integer(acc)
}

pub fn is_negative(r: &Rat) -> bool {
    r.is_negative()
}

/// serde adapter: rationals as "p/q" strings.
pub mod serde_rat {
    use super::{rat_from_string, rat_to_string, Rat};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rat_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        rat_from_string(&s).map_err(D::Error::custom)
    }
}
