use std::f64::consts::PI;

use super::{Agent, AgentError};
use crate::episode::EpisodeSpec;
use crate::render::Observation;
use crate::scene::{Action, DEFAULT_STEP, DEFAULT_TURN};

/// Reactive policy that turns toward the perceived goal and walks to it.
///
/// Rule, in order: goal fields absent → rotate left; perceived distance within
/// the stop radius → stop; bearing within ±π/12 → move ahead; otherwise rotate
/// toward the bearing.
#[derive(Debug, Clone)]
pub struct GoalSeeker {
    pub stop_radius: f64,
    pub align_tolerance: f64,
    pub step: f64,
    pub turn: f64,
    history: Vec<Observation>,
    stopped: bool,
}

impl GoalSeeker {
    pub fn new(stop_radius: f64) -> Self {
        Self {
            stop_radius,
            align_tolerance: PI / 12.0,
            step: DEFAULT_STEP,
            turn: DEFAULT_TURN,
            history: Vec::new(),
            stopped: false,
        }
    }

    pub fn decide(&self, obs: &Observation) -> Action {
        let (Some(distance), Some(bearing)) = (obs.perceived_goal_distance, obs.perceived_goal_bearing) else {
            return Action::RotateLeft { angle: self.turn };
        };
        if distance <= self.stop_radius {
            Action::Stop
        } else if bearing.abs() <= self.align_tolerance {
            Action::MoveAhead { step: self.step }
        } else if bearing > 0.0 {
            Action::RotateRight { angle: self.turn }
        } else {
            Action::RotateLeft { angle: self.turn }
        }
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }
}

impl Agent for GoalSeeker {
    fn act(&mut self, obs: &Observation, _spec: &EpisodeSpec) -> Result<Action, AgentError> {
        if self.stopped {
            return Err(AgentError::AlreadyStopped);
        }
        let action = self.decide(obs);
        self.history.push(obs.clone());
        self.stopped = action.is_stop();
        Ok(action)
    }

    fn fork(&self) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(self.clone()))
    }
}
