//! Per-timestep global light intensity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::IntensityBounds;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("intensity {level} outside bounds [{min}, {max}]")]
    OutOfBounds { level: f64, min: f64, max: f64 },
    #[error("schedule has {len} indicators but step {t} was requested")]
    TooShort { len: usize, t: u32 },
    #[error("timesteps start at 1")]
    ZeroStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LightingMode {
    Constant {
        level: f64,
    },
    /// `l_t = i_t · on_level`; `indicators[t - 1]` is `i_t`.
    Switched {
        on_level: f64,
        indicators: Vec<bool>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightingSchedule {
    pub mode: LightingMode,
    pub bounds: IntensityBounds,
}

impl LightingSchedule {
    pub fn constant(level: f64, bounds: IntensityBounds) -> Result<Self, ScheduleError> {
        check_level(level, bounds)?;
        Ok(Self {
            mode: LightingMode::Constant { level },
            bounds,
        })
    }

    pub fn switched(on_level: f64, indicators: Vec<bool>, bounds: IntensityBounds) -> Result<Self, ScheduleError> {
        check_level(on_level, bounds)?;
        Ok(Self {
            mode: LightingMode::Switched { on_level, indicators },
            bounds,
        })
    }

    /// Realized intensity at 1-based step `t`.
    pub fn intensity_at(&self, t: u32) -> Result<f64, ScheduleError> {
        if t == 0 {
            return Err(ScheduleError::ZeroStep);
        }
        match &self.mode {
            LightingMode::Constant { level } => Ok(*level),
            LightingMode::Switched { on_level, indicators } => indicators
                .get(t as usize - 1)
                .map(|&on| if on { *on_level } else { 0.0 })
                .ok_or(ScheduleError::TooShort {
                    len: indicators.len(),
                    t,
                }),
        }
    }

    pub fn covers(&self, steps: u32) -> bool {
        match &self.mode {
            LightingMode::Constant { .. } => true,
            LightingMode::Switched { indicators, .. } => indicators.len() >= steps as usize,
        }
    }

    /// Short human-readable description used in episode records.
    pub fn summary(&self) -> String {
        match &self.mode {
            LightingMode::Constant { level } => format!("constant({level})"),
            LightingMode::Switched { on_level, indicators } => {
                let flips = indicators.windows(2).filter(|w| w[0] != w[1]).count();
                let first = indicators.first().map_or("on", |&b| if b { "on" } else { "off" });
                format!("switched(on={on_level}, start={first}, flips={flips})")
            }
        }
    }
}

fn check_level(level: f64, bounds: IntensityBounds) -> Result<(), ScheduleError> {
    if level.is_finite() && bounds.contains(level) {
        Ok(())
    } else {
        Err(ScheduleError::OutOfBounds {
            level,
            min: bounds.min,
            max: bounds.max,
        })
    }
}
