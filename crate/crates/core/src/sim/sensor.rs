//! In-transit environment sensors: a mean-reverting value with bounded
//! uniform noise, and range checks against a closed safe interval.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Temperature,
    Humidity,
    Illumination,
}

impl SensorKind {
    pub fn unit(self) -> &'static str {
        match self {
            SensorKind::Temperature => "°C",
            SensorKind::Humidity => "%RH",
            SensorKind::Illumination => "lux",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Temperature => "temperature",
            SensorKind::Humidity => "humidity",
            SensorKind::Illumination => "illumination",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorProfile {
    pub kind: SensorKind,
    pub target: f64,
    pub reversion: f64,
    pub noise: f64,
    pub safe_range: (f64, f64),
    pub sample_period: SimTime,
    /// First value on dispatch; defaults to the target.
    pub initial: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("safe range must satisfy lo < hi")]
    EmptyRange,
    #[error("sample period must be positive")]
    ZeroPeriod,
    #[error("reversion must lie in [0, 1]")]
    Reversion,
    #[error("noise must be non-negative")]
    Noise,
}

impl SensorProfile {
    pub fn validate(&self) -> Result<(), SensorError> {
        let (lo, hi) = self.safe_range;
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(SensorError::EmptyRange);
        }
        if self.sample_period == SimTime::ZERO {
            return Err(SensorError::ZeroPeriod);
        }
        if !(0.0..=1.0).contains(&self.reversion) {
            return Err(SensorError::Reversion);
        }
        if self.noise.is_nan() || self.noise < 0.0 {
            return Err(SensorError::Noise);
        }
        Ok(())
    }
}

/// One step of the generator: `prev + θ(μ − prev) + σu`, `u ~ U[−1, 1]`.
/// A draw is always taken so every stream advances identically.
pub fn next_sensor_reading<R: Rng + ?Sized>(profile: &SensorProfile, prev: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(-1.0..=1.0);
    prev + profile.reversion * (profile.target - prev) + profile.noise * u
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlertDirection {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub direction: AlertDirection,
    /// Distance outside the safe range.
    pub magnitude: f64,
}

/// The safe range is closed: values equal to a bound are fine.
pub fn detect_violation(value: f64, profile: &SensorProfile) -> Option<Violation> {
    let (lo, hi) = profile.safe_range;
    if value > hi {
        Some(Violation {
            direction: AlertDirection::High,
            magnitude: value - hi,
        })
    } else if value < lo {
        Some(Violation {
            direction: AlertDirection::Low,
            magnitude: lo - value,
        })
    } else {
        None
    }
}
