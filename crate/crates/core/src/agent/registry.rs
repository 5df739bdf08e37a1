use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{parse_script, Agent, AgentError, AgentFactory, GoalSeeker, IntensityBand, ScriptedAgent, ThresholdAgent};
use crate::bridge::BridgeFactory;
use crate::episode::EpisodeSpec;
use crate::scene::{Action, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentOptions {
    /// Perception band for the `threshold` agent.
    pub band: IntensityBand,
    /// Per-message timeout for `bridge:` agents, in milliseconds.
    pub bridge_timeout_ms: u64,
}

impl Default for AgentOptions {
    fn default() -> Self {
        Self {
            band: IntensityBand::closed(0.5, 1.5),
            bridge_timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GoalSeekerFactory;

impl AgentFactory for GoalSeekerFactory {
    fn name(&self) -> String {
        "goal_seeker".into()
    }

    fn create(&self, scene: &Scene, _spec: &EpisodeSpec) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(GoalSeeker::new(scene.goal.radius)))
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdFactory {
    pub band: IntensityBand,
}

impl AgentFactory for ThresholdFactory {
    fn name(&self) -> String {
        "threshold".into()
    }

    fn create(&self, scene: &Scene, _spec: &EpisodeSpec) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(ThresholdAgent::new(
            self.band,
            Box::new(GoalSeeker::new(scene.goal.radius)),
        )))
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedFactory {
    pub source: String,
    pub script: Vec<Action>,
}

impl ScriptedFactory {
    pub fn from_file(path: &str) -> Result<Self, AgentError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| AgentError::Config(format!("cannot read script {path}: {e}")))?;
        Ok(Self {
            source: path.to_string(),
            script: parse_script(&text)?,
        })
    }
}

impl AgentFactory for ScriptedFactory {
    fn name(&self) -> String {
        format!("scripted:{}", self.source)
    }

    fn create(&self, _scene: &Scene, _spec: &EpisodeSpec) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(ScriptedAgent::new(self.script.clone())))
    }
}

/// Resolves `goal_seeker`, `threshold`, `scripted:<path>` or `bridge:<endpoint>`.
pub fn resolve_agent(name: &str, options: &AgentOptions) -> Result<Arc<dyn AgentFactory>, AgentError> {
    if let Some(path) = name.strip_prefix("scripted:") {
        return Ok(Arc::new(ScriptedFactory::from_file(path)?));
    }
    if let Some(endpoint) = name.strip_prefix("bridge:") {
        return Ok(Arc::new(BridgeFactory::new(
            endpoint,
            Duration::from_millis(options.bridge_timeout_ms),
        )?));
    }
    match name {
        "goal_seeker" => Ok(Arc::new(GoalSeekerFactory)),
        "threshold" => Ok(Arc::new(ThresholdFactory { band: options.band })),
        other => Err(AgentError::Unknown(other.to_string())),
    }
}
