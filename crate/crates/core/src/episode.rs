//! Episode specification, trajectories and the rollout loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentError, AgentFactory};
use crate::render::{render, DegradationProfile, Observation, RenderError};
use crate::scene::{check_success, transition, Action, Pose, Scene};
use crate::schedule::{LightingSchedule, ScheduleError};

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("episode configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub scene_id: String,
    pub instruction: String,
    pub max_steps: u32,
    pub seed: u64,
}

impl EpisodeSpec {
    pub fn new(scene_id: impl Into<String>, max_steps: u32, seed: u64) -> Self {
        let scene_id = scene_id.into();
        Self {
            instruction: format!("navigate to the goal region of {scene_id}"),
            scene_id,
            max_steps,
            seed,
        }
    }
}

/// A scene together with the sensor model the agent perceives it through.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub scene: Scene,
    pub profile: DegradationProfile,
}

impl World {
    pub fn new(scene: Scene, profile: DegradationProfile) -> Self {
        Self { scene, profile }
    }

    pub fn render(&self, pose: &Pose, level: f64, seed: u64, t: u32) -> Result<Observation, RenderError> {
        render(&self.scene, pose, level, &self.profile, seed, t)
    }
}

/// Rollout record. `poses[k]` is the pose at which `actions[k]` was issued
/// under intensity `applied_intensities[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub poses: Vec<Pose>,
    pub actions: Vec<Action>,
    pub applied_intensities: Vec<f64>,
    pub terminated_by_stop: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            poses: Vec::with_capacity(n),
            actions: Vec::with_capacity(n),
            applied_intensities: Vec::with_capacity(n),
            terminated_by_stop: false,
        }
    }

    pub fn push(&mut self, pose: Pose, action: Action, level: f64) {
        self.poses.push(pose);
        self.actions.push(action);
        self.applied_intensities.push(level);
        self.terminated_by_stop = action.is_stop();
    }

    pub fn succeeded(&self, scene: &Scene) -> bool {
        check_success(self, scene)
    }

    /// Pose after the last action.
    pub fn end_pose(&self, scene: &Scene) -> Option<Pose> {
        Some(transition(self.poses.last()?, self.actions.last()?, scene))
    }

    /// Per-step dump rows: `(t, x, z, rot_y, l_t, action)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,z,rot_y,l_t,action\n");
        for (i, ((p, a), l)) in self
            .poses
            .iter()
            .zip(&self.actions)
            .zip(&self.applied_intensities)
            .enumerate()
        {
            out.push_str(&format!("{},{},{},{},{},{}\n", i + 1, p.x, p.z, p.rot_y, l, a));
        }
        out
    }
}

pub(crate) fn check_episode(world: &World, spec: &EpisodeSpec) -> Result<(), EpisodeError> {
    if spec.scene_id != world.scene.id {
        return Err(EpisodeError::Config(format!(
            "episode targets scene {:?} but world holds {:?}",
            spec.scene_id, world.scene.id
        )));
    }
    if spec.max_steps == 0 {
        return Err(EpisodeError::Config("max_steps must be positive".into()));
    }
    Ok(())
}

/// Runs one episode with a freshly built agent.
pub fn run_episode(
    factory: &dyn AgentFactory,
    world: &World,
    schedule: &LightingSchedule,
    spec: &EpisodeSpec,
) -> Result<Trajectory, EpisodeError> {
    check_episode(world, spec)?;
    let mut agent = factory.create(&world.scene, spec)?;
    run_with_agent(agent.as_mut(), world, schedule, spec)
}

/// Rollout loop for `t = 1..=T`: render under `l_t`, act, transition; ends on stop or at `T`.
pub fn run_with_agent(
    agent: &mut dyn Agent,
    world: &World,
    schedule: &LightingSchedule,
    spec: &EpisodeSpec,
) -> Result<Trajectory, EpisodeError> {
    check_episode(world, spec)?;
    if !schedule.covers(spec.max_steps) {
        return Err(EpisodeError::Config(format!(
            "lighting schedule shorter than max_steps {}",
            spec.max_steps
        )));
    }
    let mut pose = world.scene.start;
    let mut traj = Trajectory::with_capacity(spec.max_steps as usize);
    for t in 1..=spec.max_steps {
        let level = schedule.intensity_at(t)?;
        let obs = world.render(&pose, level, spec.seed, t)?;
        let action = agent.act(&obs, spec)?;
        traj.push(pose, action, level);
        if action.is_stop() {
            break;
        }
        pose = transition(&pose, &action, &world.scene);
    }
    Ok(traj)
}
