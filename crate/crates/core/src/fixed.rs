//! Fixed-point coordinates for the line and the circle.
//!
//! A [`Fixed`] value is an integer number of ticks of size `2^-32`. Values are
//! kept within `|x| < 2^20`, so every coordinate converts to `f64` without
//! rounding and sums of two coordinates stay exact. Translations, rotations
//! and interval swaps with grid parameters are therefore exactly invertible,
//! and the Lebesgue mass of a half-open grid interval is its tick count times
//! `2^-32`.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FRAC_BITS: u32 = 32;
pub const TICKS_PER_UNIT: i64 = 1 << FRAC_BITS;
/// Exclusive bound on the magnitude of a coordinate, in ticks.
pub const MAX_TICKS: i64 = 1 << (FRAC_BITS + 20);
/// Size of one tick as a real number.
pub const TICK: f64 = 1.0 / TICKS_PER_UNIT as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Fixed(i64);

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);
    pub const ONE: Fixed = Fixed(TICKS_PER_UNIT);

    pub fn from_ticks(ticks: i64) -> Result<Fixed> {
        if ticks.abs() >= MAX_TICKS {
            return Err(Error::CoordinateRange(ticks as f64 * TICK));
        }
        Ok(Fixed(ticks))
    }

    /// Rounds `x` to the nearest grid point.
    pub fn from_f64(x: f64) -> Result<Fixed> {
        if !x.is_finite() {
            return Err(Error::CoordinateRange(x));
        }
        let scaled = (x * TICKS_PER_UNIT as f64).round();
        if scaled.abs() >= MAX_TICKS as f64 {
            return Err(Error::CoordinateRange(x));
        }
        Ok(Fixed(scaled as i64))
    }

    pub fn from_int(n: i64) -> Result<Fixed> {
        Fixed::from_ticks(n.saturating_mul(TICKS_PER_UNIT))
    }

    pub fn ticks(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 * TICK
    }

    /// Representative of `self` modulo 1, in `[0, 1)`.
    pub fn wrap_unit(self) -> Fixed {
        Fixed(self.0.rem_euclid(TICKS_PER_UNIT))
    }

    pub fn checked_add(self, rhs: Fixed) -> Result<Fixed> {
        Fixed::from_ticks(self.0 + rhs.0)
    }

    pub fn checked_sub(self, rhs: Fixed) -> Result<Fixed> {
        Fixed::from_ticks(self.0 - rhs.0)
    }
}

impl TryFrom<f64> for Fixed {
    type Error = Error;
    fn try_from(x: f64) -> Result<Fixed> {
        Fixed::from_f64(x)
    }
}

impl From<Fixed> for f64 {
    fn from(x: Fixed) -> f64 {
        x.to_f64()
    }
}

// Plain arithmetic is used only where both operands are known to be in range;
// debug builds trip on overflow of the i64 representation.
impl Add for Fixed {
    type Output = Fixed;
    fn add(self, rhs: Fixed) -> Fixed {
        Fixed(self.0 + rhs.0)
    }
}

impl Sub for Fixed {
    type Output = Fixed;
    fn sub(self, rhs: Fixed) -> Fixed {
        Fixed(self.0 - rhs.0)
    }
}

impl Neg for Fixed {
    type Output = Fixed;
    fn neg(self) -> Fixed {
        Fixed(-self.0)
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values_roundtrip_through_f64() {
        for &x in &[0.0, 0.5, -3.25, 1.2, 1e5 + 0.1, -((1u64 << 19) as f64)] {
            let a = Fixed::from_f64(x).unwrap();
            assert_eq!(Fixed::from_f64(a.to_f64()).unwrap(), a);
        }
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(Fixed::from_f64(f64::NAN).is_err());
        assert!(Fixed::from_f64(2f64.powi(20)).is_err());
        assert!(Fixed::from_f64(2f64.powi(20) - 1.0).is_ok());
    }

    #[test]
    fn wrap_unit_is_mod_one() {
        let x = Fixed::from_f64(-0.25).unwrap();
        assert_eq!(x.wrap_unit(), Fixed::from_f64(0.75).unwrap());
        assert_eq!(Fixed::ONE.wrap_unit(), Fixed::ZERO);
    }
}
