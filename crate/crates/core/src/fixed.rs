//! Fixed-precision decimal values for real-valued signals.
//!
//! Real signals (uncertainty `U` and friends) are compared against thresholds
//! inside guards. Storing them as scaled integers keeps every comparison exact,
//! so a guard flips at the same instant on every run and every platform.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of fractional decimal digits retained.
pub const DECIMALS: u32 = 6;
const SCALE: i64 = 1_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed(i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid decimal literal `{0}`")]
pub struct ParseFixedError(pub String);

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);
    pub const ONE: Fixed = Fixed(SCALE);

    pub const fn from_raw(raw: i64) -> Self {
        Fixed(raw)
    }

    pub const fn raw(self) -> i64 {
        self.0
    }

    pub const fn from_int(v: i64) -> Self {
        Fixed(v * SCALE)
    }

    /// Rounds to the nearest representable value.
    pub fn from_f64(v: f64) -> Self {
        Fixed((v * SCALE as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }
}

impl FromStr for Fixed {
    type Err = ParseFixedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseFixedError(s.to_string());
        let t = s.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        if body.is_empty() {
            return Err(err());
        }
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || frac_part.len() > DECIMALS as usize
        {
            return Err(err());
        }
        let int: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| err())?
        };
        let mut frac: i64 = 0;
        for (i, c) in frac_part.chars().enumerate() {
            frac += (c as i64 - '0' as i64) * 10i64.pow(DECIMALS - 1 - i as u32);
        }
        let raw = int
            .checked_mul(SCALE)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(err)?;
        Ok(Fixed(if neg { -raw } else { raw }))
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let int = abs / SCALE as u64;
        let frac = abs % SCALE as u64;
        if frac == 0 {
            write!(f, "{sign}{int}")
        } else {
            let digits = format!("{frac:06}");
            write!(f, "{sign}{int}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl Serialize for Fixed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Fixed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Fixed::from_f64(v)),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_prints() {
        assert_eq!("0.7".parse::<Fixed>().unwrap(), Fixed::from_raw(700_000));
        assert_eq!("-1.25".parse::<Fixed>().unwrap().to_string(), "-1.25");
        assert_eq!(".5".parse::<Fixed>().unwrap(), Fixed::from_raw(500_000));
        assert_eq!(Fixed::from_int(3).to_string(), "3");
        assert!("1.2345678".parse::<Fixed>().is_err());
        assert!("abc".parse::<Fixed>().is_err());
        assert!(".".parse::<Fixed>().is_err());
    }

    #[test]
    fn float_literals_land_on_exact_decimals() {
        assert_eq!(Fixed::from_f64(0.7), "0.7".parse().unwrap());
        assert_eq!(Fixed::from_f64(0.1 + 0.2), "0.3".parse().unwrap());
    }

    proptest! {
        #[test]
        fn display_round_trips(raw in -10_000_000_000i64..10_000_000_000i64) {
            let v = Fixed::from_raw(raw);
            prop_assert_eq!(v.to_string().parse::<Fixed>().unwrap(), v);
        }
    }
}
