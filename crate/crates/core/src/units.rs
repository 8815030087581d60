//! Delay unit conversions.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DelayUnit {
    Chips,
    Seconds,
    Meters,
}

impl DelayUnit {
    pub fn name(self) -> &'static str {
        match self {
            DelayUnit::Chips => "chips",
            DelayUnit::Seconds => "seconds",
            DelayUnit::Meters => "meters",
        }
    }

    /// Seconds per unit for a code with the given chip duration.
    pub fn seconds_per_unit(self, chip_duration: f64) -> f64 {
        match self {
            DelayUnit::Chips => chip_duration,
            DelayUnit::Seconds => 1.0,
            DelayUnit::Meters => 1.0 / SPEED_OF_LIGHT,
        }
    }

    pub fn to_seconds(self, value: f64, chip_duration: f64) -> f64 {
        match self {
            DelayUnit::Meters => value / SPEED_OF_LIGHT,
            _ => value * self.seconds_per_unit(chip_duration),
        }
    }

    pub fn from_seconds(self, seconds: f64, chip_duration: f64) -> f64 {
        match self {
            DelayUnit::Meters => seconds * SPEED_OF_LIGHT,
            _ => seconds / self.seconds_per_unit(chip_duration),
        }
    }
}

impl fmt::Display for DelayUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DelayUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chips" => Ok(DelayUnit::Chips),
            "seconds" => Ok(DelayUnit::Seconds),
            "meters" => Ok(DelayUnit::Meters),
            other => Err(Error::InvalidArgument(format!(
                "unknown unit '{other}', expected chips, seconds or meters"
            ))),
        }
    }
}
