#![allow(dead_code)]

use lightattack::agent::{Agent, AgentError, AgentFactory, GoalSeeker, IntensityBand, ThresholdAgent};
use lightattack::dila::{heading_deviation, LookaheadRow};
use lightattack::episode::{EpisodeSpec, World};
use lightattack::render::Observation;
use lightattack::scene::{transition, Action, GoalRegion, IntensityBounds, Pose, Rect, Scene};

/// 10 m × 10 m room, start at the origin facing +z, goal 3 m ahead.
pub fn open_room() -> Scene {
    Scene {
        id: "open".into(),
        extent: Rect::new([-5.0, -5.0], [5.0, 5.0]),
        walls: vec![],
        goal: GoalRegion {
            center: [0.0, 3.0],
            radius: 0.3,
        },
        start: Pose::new(0.0, 0.0, 0.0),
        nominal_intensity: 1.0,
        intensity_bounds: IntensityBounds::default(),
    }
}

/// Goal seeker that first dithers in place for `2·round(20·l)` steps, where
/// `l` is the luminance of its first observation. Brighter rooms give longer
/// and therefore more costly trajectories.
#[derive(Clone)]
pub struct Hesitant {
    inner: GoalSeeker,
    pause: Option<u32>,
    done: u32,
}

impl Hesitant {
    pub fn new(stop_radius: f64) -> Self {
        Self {
            inner: GoalSeeker::new(stop_radius),
            pause: None,
            done: 0,
        }
    }
}

impl Agent for Hesitant {
    fn act(&mut self, obs: &Observation, spec: &EpisodeSpec) -> Result<Action, AgentError> {
        let pause = *self.pause.get_or_insert(2 * (obs.luminance * 20.0).round() as u32);
        if self.done < pause {
            self.done += 1;
            return Ok(if self.done % 2 == 1 {
                Action::rotate_left()
            } else {
                Action::rotate_right()
            });
        }
        self.inner.act(obs, spec)
    }

    fn fork(&self) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(self.clone()))
    }
}

pub struct HesitantThreshold {
    pub band: IntensityBand,
}

impl AgentFactory for HesitantThreshold {
    fn name(&self) -> String {
        "hesitant_threshold".into()
    }

    fn create(&self, scene: &Scene, _spec: &EpisodeSpec) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(ThresholdAgent::new(
            self.band,
            Box::new(Hesitant::new(scene.goal.radius)),
        )))
    }
}

/// Replays `history` into a fresh agent and returns its answer to `obs`.
/// Uses neither `fork` nor `peek`.
fn replayed_action(
    factory: &dyn AgentFactory,
    world: &World,
    spec: &EpisodeSpec,
    history: &[Observation],
    obs: &Observation,
) -> Action {
    let mut agent = factory.create(&world.scene, spec).unwrap();
    for past in history {
        agent.act(past, spec).unwrap();
    }
    agent.act(obs, spec).unwrap()
}

/// Brute-force lookahead switching: at each step both light levels are
/// evaluated by replaying the full committed history into fresh agents.
pub fn brute_force_lookahead(
    factory: &dyn AgentFactory,
    world: &World,
    spec: &EpisodeSpec,
    on_level: f64,
    budget: Option<u32>,
) -> (Vec<LookaheadRow>, Vec<Pose>) {
    let level = |on: bool| if on { on_level } else { 0.0 };
    let mut on = true;
    let mut pose = world.scene.start;
    let mut history = Vec::new();
    let mut rows = Vec::new();
    let mut poses = Vec::new();
    let mut switches = 0;
    for t in 1..=spec.max_steps {
        if budget.is_none_or(|b| switches < b) {
            let obs_cur = world.render(&pose, level(on), spec.seed, t).unwrap();
            let obs_sw = world.render(&pose, level(!on), spec.seed, t).unwrap();
            let a_cur = replayed_action(factory, world, spec, &history, &obs_cur);
            let a_sw = replayed_action(factory, world, spec, &history, &obs_sw);
            let beta_cur = heading_deviation(&transition(&pose, &a_cur, &world.scene), &world.scene.goal);
            let beta_sw = heading_deviation(&transition(&pose, &a_sw, &world.scene), &world.scene.goal);
            let switched = beta_sw > beta_cur;
            rows.push(LookaheadRow {
                t,
                beta_cur,
                beta_sw,
                switched,
            });
            if switched {
                on = !on;
                switches += 1;
            }
        }
        let obs = world.render(&pose, level(on), spec.seed, t).unwrap();
        let action = replayed_action(factory, world, spec, &history, &obs);
        history.push(obs);
        poses.push(pose);
        if action.is_stop() {
            break;
        }
        pose = transition(&pose, &action, &world.scene);
    }
    (rows, poses)
}
