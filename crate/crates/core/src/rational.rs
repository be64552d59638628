//! Exact rational helpers shared by every module.
//!
//! Values, probabilities and matrix entries are all [`Rational`]s. On the wire
//! they are always written as `a/b` with decimal integers, never as decimals.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serializer;

pub type Rational = BigRational;

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn half() -> Rational {
    ratio(1, 2)
}

/// `2^-exp` as an exact rational.
pub fn pow2_neg(exp: u64) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << exp)
}

/// Formats as `a/b` (denominator always present).
pub fn to_ab(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `a/b` with non-negative decimal integers and a non-zero denominator.
pub fn parse_ab(text: &str) -> Option<Rational> {
    let (a, b) = text.split_once('/')?;
    if a.is_empty() || b.is_empty() {
        return None;
    }
    if !a.bytes().all(|c| c.is_ascii_digit()) || !b.bytes().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let a: BigInt = a.parse().ok()?;
    let b: BigInt = b.parse().ok()?;
    if b.is_zero() {
        return None;
    }
    Some(Rational::new(a, b))
}

/// Decimal approximation in scientific notation, computed from the exact
/// value so that values far below `f64` range still print sensibly.
pub fn approx_decimal(r: &Rational) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r.is_negative();
    let numer = r.numer().abs().to_biguint().expect("abs is non-negative");
    let denom = r.denom().to_biguint().expect("denominator is positive");
    // Estimate the decimal exponent from bit lengths, then correct it.
    let approx_log10 = (numer.bits() as f64 - denom.bits() as f64) * std::f64::consts::LOG10_2;
    let mut exp10 = approx_log10.floor() as i64 - 1;
    const DIGITS: u32 = 12;
    let scaled = |e: i64| -> BigUint {
        // floor(numer * 10^(DIGITS-1-e) / denom)
        let shift = DIGITS as i64 - 1 - e;
        if shift >= 0 {
            (&numer * BigUint::from(10u32).pow(shift as u32)) / &denom
        } else {
            &numer / (&denom * BigUint::from(10u32).pow((-shift) as u32))
        }
    };
    let lower = BigUint::from(10u32).pow(DIGITS - 1);
    let upper = BigUint::from(10u32).pow(DIGITS);
    let mut mantissa = scaled(exp10);
    for _ in 0..8 {
        if mantissa >= upper {
            exp10 += 1;
        } else if mantissa < lower {
            exp10 -= 1;
        } else {
            break;
        }
        mantissa = scaled(exp10);
    }
    let digits = mantissa.to_string();
    let (head, tail) = digits.split_at(1);
    let tail = tail.trim_end_matches('0');
    let sign = if neg { "-" } else { "" };
    if tail.is_empty() {
        format!("{sign}{head}e{exp10}")
    } else {
        format!("{sign}{head}.{tail}e{exp10}")
    }
}

/// Best-effort `f64`; zero when the value underflows.
pub fn to_f64_lossy(r: &Rational) -> f64 {
    r.to_f64().filter(|v| v.is_finite()).unwrap_or(0.0)
}

/// Whether `r` lies in the closed unit interval.
pub fn in_unit_interval(r: &Rational) -> bool {
    !r.is_negative() && *r <= Rational::one()
}

/// Least common multiple of the denominators of `values`.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigUint {
    values.into_iter().fold(BigUint::one(), |acc, r| {
        let d = r.denom().to_biguint().expect("denominator is positive");
        acc.lcm(&d)
    })
}

/// Whether the reduced denominator of `r` is a power of two.
pub fn is_dyadic(r: &Rational) -> bool {
    let d = r.denom();
    d.sign() == Sign::Plus && (d & (d - BigInt::one())).is_zero()
}

/// Serde adapter writing a rational as an `a/b` string.
pub fn serialize_ab<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&to_ab(r))
}

pub fn serialize_ab_opt<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&to_ab(r)),
        None => s.serialize_none(),
    }
}
