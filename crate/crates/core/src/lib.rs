//! Indoor-lighting attacks on embodied navigation agents.
//!
//! A [`scene::Scene`] is rendered into an [`render::Observation`] whose
//! quality depends on the global light intensity. Agents only see
//! observations. [`sila`] searches for one harmful constant intensity,
//! [`dila`] toggles the lights during the episode, and [`metrics`] turns
//! the resulting episodes into attack success rate and episode length.

pub mod agent;
pub mod bridge;
pub mod dila;
pub mod episode;
pub mod experiment;
pub mod loss;
pub mod metrics;
pub mod render;
pub mod report;
pub mod scene;
pub mod schedule;
pub mod sila;

pub use agent::{resolve_agent, Agent, AgentError, AgentFactory, AgentOptions};
pub use dila::{dila_attack, DilaConfig, DilaOutcome};
pub use episode::{run_episode, EpisodeError, EpisodeSpec, Trajectory, World};
pub use metrics::{compute_asr, compute_el, Condition, EpisodeRecord, EvalReport};
pub use render::{render, DegradationProfile, Observation};
pub use scene::{Action, IntensityBounds, Pose, Scene};
pub use schedule::LightingSchedule;
pub use sila::{sila_attack, AttackError, SilaConfig, SilaOutcome};
