//! Navigation policies and their construction.
//!
//! An [`Agent`] owns its committed observation history. [`Agent::act`]
//! commits; [`Agent::peek`] answers the same question on a snapshot and
//! leaves the committed state untouched.

mod goal_seeker;
mod registry;
mod scripted;
mod threshold;

pub use goal_seeker::GoalSeeker;
pub use registry::{resolve_agent, AgentOptions, GoalSeekerFactory, ScriptedFactory, ThresholdFactory};
pub use scripted::{parse_script, ScriptedAgent};
pub use threshold::{IntensityBand, ThresholdAgent};

use thiserror::Error;

use crate::bridge::BridgeError;
use crate::episode::EpisodeSpec;
use crate::render::Observation;
use crate::scene::{Action, Scene};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent already issued stop")]
    AlreadyStopped,
    #[error("agent cannot be forked")]
    ForkUnsupported,
    #[error("unknown agent {0:?}")]
    Unknown(String),
    #[error("agent configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

pub trait Agent: Send {
    /// Chooses the next action and commits `obs` to the history.
    fn act(&mut self, obs: &Observation, spec: &EpisodeSpec) -> Result<Action, AgentError>;

    /// Deep snapshot; stepping the fork never affects `self`.
    fn fork(&self) -> Result<Box<dyn Agent>, AgentError>;

    /// The action `act` would return for `obs`, without committing anything.
    fn peek(&mut self, obs: &Observation, spec: &EpisodeSpec) -> Result<Action, AgentError> {
        self.fork()?.act(obs, spec)
    }
}

/// Builds a fresh agent for each episode.
pub trait AgentFactory: Send + Sync {
    fn name(&self) -> String;
    fn create(&self, scene: &Scene, spec: &EpisodeSpec) -> Result<Box<dyn Agent>, AgentError>;
}

impl<F> AgentFactory for F
where
    F: Fn(&Scene, &EpisodeSpec) -> Result<Box<dyn Agent>, AgentError> + Send + Sync,
{
    fn name(&self) -> String {
        "custom".into()
    }

    fn create(&self, scene: &Scene, spec: &EpisodeSpec) -> Result<Box<dyn Agent>, AgentError> {
        self(scene, spec)
    }
}
