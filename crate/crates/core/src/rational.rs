use crate::error::{Error, Result};
use num_traits::ToPrimitive;

/// Exact score arithmetic. Denominators stay positive after reduction.
pub type Rational = num_rational::Ratio<i64>;

/// Reduced rational from a numerator/denominator pair.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(num, den)
}

pub fn to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses `-0.36`, `0.5`, `2`, or `-23/64` into an exact rational.
/// Decimal inputs are read digit-for-digit, never through floating point.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = |msg: &str| Error::Validation(format!("cannot parse {s:?} as a rational: {msg}"));
    if s.is_empty() {
        return Err(bad("empty"));
    }
    if let Some((n, d)) = s.split_once('/') {
        let num: i64 = n.trim().parse().map_err(|_| bad("bad numerator"))?;
        let den: i64 = d.trim().parse().map_err(|_| bad("bad denominator"))?;
        if den == 0 {
            return Err(bad("zero denominator"));
        }
        return Ok(Rational::new(num, den));
    }
    let (sign, digits) = match s.strip_prefix('-') {
        Some(rest) => (-1i64, rest),
        None => (1i64, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad("no digits"));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad("non-digit character"));
    }
    if frac_part.len() > 18 {
        return Err(bad("more than 18 fractional digits"));
    }
    let int_val: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| bad("integer part overflows"))?
    };
    let den = 10i64.pow(frac_part.len() as u32);
    let frac_val: i64 = if frac_part.is_empty() {
        0
    } else {
        frac_part.parse().map_err(|_| bad("fraction overflows"))?
    };
    let num = int_val
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac_val))
        .ok_or_else(|| bad("overflow"))?;
    Ok(Rational::new(sign * num, den))
}

/// Serde adapter rendering a rational as `{"num": i64, "den": i64}`.
pub mod serde_ratio {
    use super::Rational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        num: i64,
        den: i64,
    }

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        Repr { num: *r.numer(), den: *r.denom() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let repr = Repr::deserialize(d)?;
        if repr.den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Rational::new(repr.num, repr.den))
    }
}
