use super::{Agent, AgentError};
use crate::episode::EpisodeSpec;
use crate::render::Observation;
use crate::scene::Action;

/// Replays a fixed action list, then stops. Ignores observations.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    script: Vec<Action>,
    cursor: usize,
    stopped: bool,
}

impl ScriptedAgent {
    pub fn new(script: Vec<Action>) -> Self {
        Self {
            script,
            cursor: 0,
            stopped: false,
        }
    }
}

impl Agent for ScriptedAgent {
    fn act(&mut self, _obs: &Observation, _spec: &EpisodeSpec) -> Result<Action, AgentError> {
        if self.stopped {
            return Err(AgentError::AlreadyStopped);
        }
        let action = self.script.get(self.cursor).copied().unwrap_or(Action::Stop);
        self.cursor += 1;
        self.stopped = action.is_stop();
        Ok(action)
    }

    fn fork(&self) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(self.clone()))
    }
}

/// One action per line (`move_ahead [step]`, `rotate_left [rad]`,
/// `rotate_right [rad]`, `stop`); blank lines and `#` comments are skipped.
pub fn parse_script(text: &str) -> Result<Vec<Action>, AgentError> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.split('#').next().unwrap_or("").trim();
            (!line.is_empty()).then(|| {
                line.parse::<Action>()
                    .map_err(|e| AgentError::Config(format!("script line {}: {e}", i + 1)))
            })
        })
        .collect()
}
