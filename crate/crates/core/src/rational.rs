//! Helpers for exact rational quantities.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational used for probabilities, leak factors and potentials.
pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"0.05"`, `"-3"`, `"1e-2"` or `"7/10"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    if exponent.unsigned_abs() > 4096 {
        return None;
    }
    let joined = format!("{whole}{frac}");
    let mut num: BigInt = if joined.is_empty() {
        BigInt::zero()
    } else {
        joined.parse().ok()?
    };
    if negative {
        num = -num;
    }
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        Rational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(num, num_traits::pow(ten, (-scale) as usize))
    })
}

/// Converts a finite `f64` through its shortest round-trip decimal form, so
/// `0.7_f64` becomes exactly 7/10.
pub fn from_f64_decimal(v: f64) -> Option<Rational> {
    if !v.is_finite() {
        return None;
    }
    parse_rational(&format!("{v}"))
}

/// Exact decimal expansion when the denominator has only factors 2 and 5.
pub fn to_decimal_string(q: &Rational) -> Option<String> {
    let mut den = q.denom().magnitude().clone();
    let two = BigUint::from(2u32);
    let five = BigUint::from(5u32);
    let (mut twos, mut fives) = (0usize, 0usize);
    while den.is_even() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scaled = q * Rational::from_integer(num_traits::pow(BigInt::from(10), places));
    let digits = scaled.to_integer();
    if places == 0 {
        return Some(digits.to_string());
    }
    let negative = digits.is_negative();
    let mut s = digits.abs().to_string();
    if s.len() <= places {
        s = format!("{}{}", "0".repeat(places + 1 - s.len()), s);
    }
    let (int_part, frac_part) = s.split_at(s.len() - places);
    let frac_part = frac_part.trim_end_matches('0');
    let sign = if negative { "-" } else { "" };
    Some(if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    })
}

/// Decimal when exact, `n/d` otherwise.
pub fn display(q: &Rational) -> String {
    to_decimal_string(q).unwrap_or_else(|| format!("{}/{}", q.numer(), q.denom()))
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        let n = q.numer().to_f64().unwrap_or(f64::NAN);
        let d = q.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Floor of a rational as `i64`, saturating at the `i64` range.
pub fn floor_i64(q: &Rational) -> i64 {
    let f = q.floor().to_integer();
    f.to_i64().unwrap_or(if f.is_negative() { i64::MIN } else { i64::MAX })
}

pub fn is_probability(q: &Rational) -> bool {
    !q.is_negative() && *q <= Rational::one()
}
