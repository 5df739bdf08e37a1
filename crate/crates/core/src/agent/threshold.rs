use serde::{Deserialize, Serialize};

use super::{Agent, AgentError};
use crate::episode::EpisodeSpec;
use crate::render::Observation;
use crate::scene::{quantize_intensity, Action};

/// Intensity band `[low, high]`, or `[low, high)` when `high_exclusive`.
/// Membership is decided on quantized intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityBand {
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub high_exclusive: bool,
}

impl IntensityBand {
    pub fn closed(low: f64, high: f64) -> Self {
        Self {
            low,
            high,
            high_exclusive: false,
        }
    }

    pub fn half_open(low: f64, high: f64) -> Self {
        Self {
            low,
            high,
            high_exclusive: true,
        }
    }

    pub fn contains(&self, level: f64) -> bool {
        let q = quantize_intensity(level);
        let (low, high) = (quantize_intensity(self.low), quantize_intensity(self.high));
        q >= low && if self.high_exclusive { q < high } else { q <= high }
    }
}

/// Wraps another agent and blinds it whenever the observed luminance leaves
/// the band: goal fields are stripped before the inner agent sees them.
pub struct ThresholdAgent {
    band: IntensityBand,
    inner: Box<dyn Agent>,
}

impl ThresholdAgent {
    pub fn new(band: IntensityBand, inner: Box<dyn Agent>) -> Self {
        Self { band, inner }
    }

    fn perceive(&self, obs: &Observation) -> Observation {
        let mut seen = obs.clone();
        if !self.band.contains(obs.luminance) {
            seen.perceived_goal_bearing = None;
            seen.perceived_goal_distance = None;
        }
        seen
    }
}

impl Agent for ThresholdAgent {
    fn act(&mut self, obs: &Observation, spec: &EpisodeSpec) -> Result<Action, AgentError> {
        let seen = self.perceive(obs);
        self.inner.act(&seen, spec)
    }

    fn fork(&self) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(Self {
            band: self.band,
            inner: self.inner.fork()?,
        }))
    }

    fn peek(&mut self, obs: &Observation, spec: &EpisodeSpec) -> Result<Action, AgentError> {
        let seen = self.perceive(obs);
        self.inner.peek(&seen, spec)
    }
}
