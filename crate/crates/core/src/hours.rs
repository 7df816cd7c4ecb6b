//! Exact person-hour quantities.
//!
//! Effort totals in a plan have to reconcile to the hour (a 2600 h backlog
//! splits into 2000 h of work packages plus a 600 h pool), and spreading a
//! pool over weeks produces thirds and sevenths. Everything is therefore kept
//! as a rational number of hours; nothing is ever rounded.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A (possibly fractional) number of person-hours.
///
/// Serialized as a JSON integer when whole, otherwise as a `"num/den"`
/// string. Decimal strings such as `"12.5"` are accepted on input.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Hours(Ratio<i128>);

impl Hours {
    pub const ZERO: Hours = Hours(Ratio::new_raw(0, 1));

    pub fn new(whole: i64) -> Self {
        Hours(Ratio::from_integer(whole as i128))
    }

    /// `numer / denom` hours. Panics if `denom` is zero.
    pub fn ratio(numer: i64, denom: i64) -> Self {
        Hours(Ratio::new(numer as i128, denom as i128))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn min(self, other: Hours) -> Hours {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Hours) -> Hours {
        std::cmp::max(self, other)
    }

    /// Smallest integer `k` with `k * unit >= self`. `unit` must be positive.
    pub fn ceil_div(self, unit: Hours) -> u64 {
        let q = (self.0 / unit.0).ceil();
        q.to_integer().max(0) as u64
    }

    /// Lossy conversion, for rendering only.
    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for Hours {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Hours {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}h")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid hours value {0:?}")]
pub struct ParseHoursError(String);

impl FromStr for Hours {
    type Err = ParseHoursError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseHoursError(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i128 = n.trim().parse().map_err(|_| err())?;
            let d: i128 = d.trim().parse().map_err(|_| err())?;
            if d == 0 {
                return Err(err());
            }
            return Ok(Hours(Ratio::new(n, d)));
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 18 {
                return Err(err());
            }
            let negative = int.starts_with('-');
            let int: i128 = if int.is_empty() || int == "-" {
                0
            } else {
                int.parse().map_err(|_| err())?
            };
            let scale = 10i128.pow(frac.len() as u32);
            let frac: i128 = frac.parse().map_err(|_| err())?;
            let magnitude = int.abs() * scale + frac;
            let numer = if negative { -magnitude } else { magnitude };
            return Ok(Hours(Ratio::new(numer, scale)));
        }
        let n: i128 = s.parse().map_err(|_| err())?;
        Ok(Hours(Ratio::from_integer(n)))
    }
}

impl Serialize for Hours {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            if let Ok(v) = i64::try_from(*self.0.numer()) {
                return serializer.serialize_i64(v);
            }
        }
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Hours {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct HoursVisitor;

        impl Visitor<'_> for HoursVisitor {
            type Value = Hours;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer, a decimal string or a \"num/den\" string")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Hours, E> {
                Ok(Hours::new(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Hours, E> {
                i64::try_from(v)
                    .map(Hours::new)
                    .map_err(|_| E::custom("hours value out of range"))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Hours, E> {
                // Shortest round-trip representation, then exact decimal parse.
                if !v.is_finite() {
                    return Err(E::custom("hours must be finite"));
                }
                let text = format!("{v}");
                text.parse().map_err(E::custom)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Hours, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(HoursVisitor)
    }
}

impl Add for Hours {
    type Output = Hours;
    fn add(self, rhs: Hours) -> Hours {
        Hours(self.0 + rhs.0)
    }
}

impl AddAssign for Hours {
    fn add_assign(&mut self, rhs: Hours) {
        self.0 += rhs.0;
    }
}

impl Sub for Hours {
    type Output = Hours;
    fn sub(self, rhs: Hours) -> Hours {
        Hours(self.0 - rhs.0)
    }
}

impl SubAssign for Hours {
    fn sub_assign(&mut self, rhs: Hours) {
        self.0 -= rhs.0;
    }
}

impl Neg for Hours {
    type Output = Hours;
    fn neg(self) -> Hours {
        Hours(-self.0)
    }
}

impl Mul for Hours {
    type Output = Hours;
    fn mul(self, rhs: Hours) -> Hours {
        Hours(self.0 * rhs.0)
    }
}

impl Mul<i64> for Hours {
    type Output = Hours;
    fn mul(self, rhs: i64) -> Hours {
        Hours(self.0 * rhs as i128)
    }
}

impl Div<i64> for Hours {
    type Output = Hours;
    fn div(self, rhs: i64) -> Hours {
        Hours(self.0 / rhs as i128)
    }
}

impl Div for Hours {
    type Output = Hours;
    fn div(self, rhs: Hours) -> Hours {
        Hours(self.0 / rhs.0)
    }
}

impl Sum for Hours {
    fn sum<I: Iterator<Item = Hours>>(iter: I) -> Hours {
        iter.fold(Hours::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Hours> for Hours {
    fn sum<I: Iterator<Item = &'a Hours>>(iter: I) -> Hours {
        iter.copied().sum()
    }
}

impl From<i64> for Hours {
    fn from(v: i64) -> Self {
        Hours::new(v)
    }
}

impl PartialEq<i64> for Hours {
    fn eq(&self, other: &i64) -> bool {
        self.0 == Ratio::from_integer(*other as i128)
    }
}

impl PartialOrd<i64> for Hours {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        self.0.partial_cmp(&Ratio::from_integer(*other as i128))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_input_forms() {
        assert_eq!("150".parse::<Hours>().unwrap(), Hours::new(150));
        assert_eq!("100/7".parse::<Hours>().unwrap(), Hours::ratio(100, 7));
        assert_eq!("12.5".parse::<Hours>().unwrap(), Hours::ratio(25, 2));
        assert_eq!("-0.25".parse::<Hours>().unwrap(), Hours::ratio(-1, 4));
        assert!("1/0".parse::<Hours>().is_err());
        assert!("abc".parse::<Hours>().is_err());
        assert!("1.".parse::<Hours>().is_err());
    }

    #[test]
    fn json_forms() {
        assert_eq!(serde_json::to_string(&Hours::new(40)).unwrap(), "40");
        assert_eq!(serde_json::to_string(&Hours::ratio(600, 31)).unwrap(), "\"600/31\"");
        let h: Hours = serde_json::from_str("2.5").unwrap();
        assert_eq!(h, Hours::ratio(5, 2));
        let h: Hours = serde_json::from_str("\"100/7\"").unwrap();
        assert_eq!(h * 7, Hours::new(100));
    }

    #[test]
    fn sevenths_reconcile_exactly() {
        let share = Hours::new(100) / 7;
        let total: Hours = std::iter::repeat_n(share, 7).sum();
        assert_eq!(total, 100);
    }

    #[test]
    fn ceil_div_rounds_up() {
        assert_eq!(Hours::new(170).ceil_div(Hours::new(160)), 2);
        assert_eq!(Hours::new(160).ceil_div(Hours::new(160)), 1);
        assert_eq!(Hours::ZERO.ceil_div(Hours::new(40)), 0);
    }
}
