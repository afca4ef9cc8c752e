//! Exact rational scalar type and parsing/formatting helpers.
//!
//! All link rates, queue contents, LP coefficients, and metric sums in this
//! crate are [`Rat`] values. Floating point appears only at presentation
//! boundaries (slope fitting, CSV decimal columns) and never feeds back into
//! state evolution or feasibility decisions.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;

pub type Rat = BigRational;

/// Shorthand constructor from an integer pair. Panics on a zero denominator.
pub fn rat(numer: i64, denom: i64) -> Rat {
    Rat::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

pub fn rat_one() -> Rat {
    Rat::one()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {literal:?}: {reason}")]
pub struct ParseRatError {
    pub literal: String,
    pub reason: String,
}

fn parse_err(literal: &str, reason: impl Into<String>) -> ParseRatError {
    ParseRatError {
        literal: literal.to_owned(),
        reason: reason.into(),
    }
}

/// Parses `"p/q"`, integer (`"3"`), and decimal (`"0.52"`) literals exactly.
///
/// Decimals convert without rounding: `0.52` becomes `13/25`. A sign is
/// accepted on the front of any form.
pub fn parse_rat(s: &str) -> Result<Rat, ParseRatError> {
    let t = s.trim();
    if t.is_empty() {
        return Err(parse_err(s, "empty"));
    }
    if let Some((n, d)) = t.split_once('/') {
        let numer = BigInt::from_str(n.trim()).map_err(|e| parse_err(s, e.to_string()))?;
        let denom = BigInt::from_str(d.trim()).map_err(|e| parse_err(s, e.to_string()))?;
        if denom.is_zero() {
            return Err(parse_err(s, "zero denominator"));
        }
        return Ok(Rat::new(numer, denom));
    }
    if let Some((int_part, frac_part)) = t.split_once('.') {
        let (sign, int_digits) = match int_part.trim().strip_prefix('-') {
            Some(rest) => (-1i64, rest),
            None => (1i64, int_part.trim().strip_prefix('+').unwrap_or(int_part.trim())),
        };
        let int_digits = if int_digits.is_empty() { "0" } else { int_digits };
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(parse_err(s, "malformed decimal"));
        }
        let whole = BigInt::from_str(int_digits).map_err(|e| parse_err(s, e.to_string()))?;
        let frac = BigInt::from_str(frac_part).map_err(|e| parse_err(s, e.to_string()))?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let magnitude = Rat::from(whole) + Rat::new(frac, scale);
        return Ok(Rat::from(BigInt::from(sign)) * magnitude);
    }
    let n = BigInt::from_str(t).map_err(|e| parse_err(s, e.to_string()))?;
    Ok(Rat::from(n))
}

/// Formats as `"p/q"`, or just `"p"` when the value is an integer.
pub fn format_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Formats `r` as a decimal with exactly `places` digits after the point,
/// rounded half away from zero. Exact integer arithmetic throughout, so the
/// output is reproducible byte-for-byte.
pub fn format_decimal(r: &Rat, places: usize) -> String {
    let scale = BigInt::from(10u32).pow(places as u32);
    let scaled = r * Rat::from(scale.clone());
    // Round half away from zero.
    let rounded = (&scaled
        + Rat::new(BigInt::from(scaled.numer().signum()), BigInt::from(2)))
    .trunc();
    let units = rounded.numer().clone();
    let negative = units.is_negative();
    let abs = units.abs();
    let int_part = &abs / &scale;
    let frac_part = &abs % &scale;
    let sign = if negative { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part:0>width$}", width = places)
    }
}

/// Lossy conversion for presentation and slope fitting only.
pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Enormous numerator/denominator pairs can overflow the direct
        // conversion; fall back on a truncated decimal.
        format_decimal(r, 12).parse().unwrap_or(f64::NAN)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_integer_and_decimal_forms() {
        assert_eq!(parse_rat("2/3").unwrap(), rat(2, 3));
        assert_eq!(parse_rat("1").unwrap(), rat(1, 1));
        assert_eq!(parse_rat("0.52").unwrap(), rat(13, 25));
        assert_eq!(parse_rat("-0.5").unwrap(), rat(-1, 2));
        assert_eq!(parse_rat(" 9/17 ").unwrap(), rat(9, 17));
        assert_eq!(parse_rat(".25").unwrap(), rat(1, 4));
    }

    #[test]
    fn rejects_malformed_literals() {
        for bad in ["", "1/0", "a", "1.2.3", "1/ w", "0x2"] {
            assert!(parse_rat(bad).is_err(), "expected parse failure for {bad:?}");
        }
    }

    #[test]
    fn formats_round_trip() {
        for r in [rat(9, 17), rat(-3, 4), rat(5, 1), rat(0, 1)] {
            assert_eq!(parse_rat(&format_rat(&r)).unwrap(), r);
        }
    }

    #[test]
    fn decimal_formatting_is_exact_and_rounded() {
        assert_eq!(format_decimal(&rat(9, 17), 6), "0.529412");
        assert_eq!(format_decimal(&rat(1, 2), 0), "1"); // half away from zero
        assert_eq!(format_decimal(&rat(-1, 8), 2), "-0.13");
        assert_eq!(format_decimal(&rat(13, 25), 4), "0.5200");
        assert_eq!(format_decimal(&rat(2, 1), 3), "2.000");
    }
}
