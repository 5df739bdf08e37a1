//! Dynamic lighting attack: on/off switching driven by a one-step lookahead.
//!
//! At every step the controller asks the agent, without committing, what it
//! would do under the current light level and under the flipped level,
//! simulates both next poses and flips the light when the flipped branch
//! leaves the agent facing further away from the goal.

use rand::seq::index;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentFactory};
use crate::episode::{check_episode, EpisodeSpec, Trajectory, World};
use crate::scene::{transition, Action, GoalRegion, IntensityBounds, Pose};
use crate::schedule::LightingSchedule;
use crate::sila::AttackError;

/// Angle in `[0, π]` between the toward-goal vector and the facing vector.
/// Zero when the agent stands exactly on the goal center.
pub fn heading_deviation(pose: &Pose, goal: &GoalRegion) -> f64 {
    let to_goal = [goal.center[0] - pose.x, goal.center[1] - pose.z];
    if to_goal[0] == 0.0 && to_goal[1] == 0.0 {
        return 0.0;
    }
    let facing = pose.facing();
    let dot = to_goal[0] * facing[0] + to_goal[1] * facing[1];
    let cross = to_goal[0] * facing[1] - to_goal[1] * facing[0];
    // atan2(|v1×v2|, v1·v2) is arccos of the normalized dot product, without
    // the loss of precision near 0 and π.
    cross.abs().atan2(dot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trigger {
    LookaheadDeviation,
    RandomTrigger { count: u32, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilaConfig {
    pub on_level: f64,
    /// `None` is unlimited.
    pub switch_budget: Option<u32>,
    pub initial_on: bool,
    pub trigger: Trigger,
    pub bounds: IntensityBounds,
}

impl DilaConfig {
    /// Lookahead trigger, unlimited switches, light initially on.
    pub fn new(on_level: f64) -> Self {
        Self {
            on_level,
            switch_budget: None,
            initial_on: true,
            trigger: Trigger::LookaheadDeviation,
            bounds: IntensityBounds::default(),
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if !(self.on_level.is_finite() && self.bounds.contains(self.on_level)) {
            return Err(AttackError::Config(format!(
                "on_level {} outside bounds [{}, {}]",
                self.on_level, self.bounds.min, self.bounds.max
            )));
        }
        if self.on_level == 0.0 {
            return Err(AttackError::Config("on_level must differ from the off level 0".into()));
        }
        if self.switch_budget == Some(0) {
            return Err(AttackError::Config(
                "switch_budget must be at least 1 (or unlimited)".into(),
            ));
        }
        Ok(())
    }

    fn level(&self, on: bool) -> f64 {
        if on {
            self.on_level
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookaheadDecision {
    pub switched: bool,
    pub beta_cur: f64,
    pub beta_sw: f64,
    pub action_cur: Action,
    pub action_sw: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookaheadRow {
    pub t: u32,
    pub beta_cur: f64,
    pub beta_sw: f64,
    pub switched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilaOutcome {
    pub trajectory: Trajectory,
    /// Steps (1-based) at which the light was flipped before the step was committed.
    pub switch_steps: Vec<u32>,
    pub lookahead_trace: Vec<LookaheadRow>,
    pub peek_queries: u32,
    pub on_level: f64,
    pub initial_on: bool,
}

impl DilaOutcome {
    /// Realized on/off pattern as a schedule (indicators for executed steps only).
    pub fn schedule(&self, bounds: IntensityBounds) -> Result<LightingSchedule, AttackError> {
        let indicators = self.trajectory.applied_intensities.iter().map(|&l| l != 0.0).collect();
        LightingSchedule::switched(self.on_level, indicators, bounds).map_err(|e| AttackError::Config(e.to_string()))
    }
}

/// Peeks the agent under `l_cur` and `l_sw`, simulates both next poses and
/// decides to switch iff `β_sw − β_cur > 0`.
pub fn lookahead_decide(
    agent: &mut dyn Agent,
    pose: &Pose,
    world: &World,
    spec: &EpisodeSpec,
    l_cur: f64,
    l_sw: f64,
    t: u32,
) -> Result<LookaheadDecision, AttackError> {
    if l_cur == l_sw {
        return Err(AttackError::Config(format!(
            "lookahead needs two distinct levels, got {l_cur} twice"
        )));
    }
    let goal = &world.scene.goal;
    let obs_cur = world.render(pose, l_cur, spec.seed, t)?;
    let obs_sw = world.render(pose, l_sw, spec.seed, t)?;
    let action_cur = agent.peek(&obs_cur, spec)?;
    let action_sw = agent.peek(&obs_sw, spec)?;
    let beta_cur = heading_deviation(&transition(pose, &action_cur, &world.scene), goal);
    let beta_sw = heading_deviation(&transition(pose, &action_sw, &world.scene), goal);
    Ok(LookaheadDecision {
        switched: beta_sw - beta_cur > 0.0,
        beta_cur,
        beta_sw,
        action_cur,
        action_sw,
    })
}

/// Runs one episode under lookahead-controlled (or randomly triggered) switching.
pub fn dila_attack(
    world: &World,
    factory: &dyn AgentFactory,
    spec: &EpisodeSpec,
    config: &DilaConfig,
) -> Result<DilaOutcome, AttackError> {
    config.validate()?;
    if let Trigger::RandomTrigger { count, seed } = config.trigger {
        let count = config.switch_budget.map_or(count, |b| count.min(b));
        return switch_at_random(world, factory, spec, config, count, seed);
    }
    check_episode(world, spec)?;
    let mut agent = factory.create(&world.scene, spec)?;

    let mut on = config.initial_on;
    let mut pose = world.scene.start;
    let mut trajectory = Trajectory::with_capacity(spec.max_steps as usize);
    let mut switch_steps = Vec::new();
    let mut trace = Vec::new();
    let mut peek_queries = 0;

    for t in 1..=spec.max_steps {
        let budget_left = config.switch_budget.is_none_or(|b| (switch_steps.len() as u32) < b);
        if budget_left {
            let d = lookahead_decide(
                agent.as_mut(),
                &pose,
                world,
                spec,
                config.level(on),
                config.level(!on),
                t,
            )?;
            peek_queries += 2;
            trace.push(LookaheadRow {
                t,
                beta_cur: d.beta_cur,
                beta_sw: d.beta_sw,
                switched: d.switched,
            });
            if d.switched {
                on = !on;
                switch_steps.push(t);
            }
        }
        let level = config.level(on);
        let obs = world.render(&pose, level, spec.seed, t)?;
        let action = agent.act(&obs, spec)?;
        trajectory.push(pose, action, level);
        if action.is_stop() {
            break;
        }
        pose = transition(&pose, &action, &world.scene);
    }

    Ok(DilaOutcome {
        trajectory,
        switch_steps,
        lookahead_trace: trace,
        peek_queries,
        on_level: config.on_level,
        initial_on: config.initial_on,
    })
}

/// Ablation baseline: flips the light at `count` distinct steps drawn
/// uniformly from `1..=T`, with no lookahead queries.
pub fn random_trigger_baseline(
    world: &World,
    factory: &dyn AgentFactory,
    spec: &EpisodeSpec,
    on_level: f64,
    count: u32,
    seed: u64,
) -> Result<DilaOutcome, AttackError> {
    let config = DilaConfig {
        trigger: Trigger::RandomTrigger { count, seed },
        ..DilaConfig::new(on_level)
    };
    config.validate()?;
    switch_at_random(world, factory, spec, &config, count, seed)
}

/// The `count` distinct switch steps in `1..=max_steps` drawn from `seed`, ascending.
pub fn sample_switch_steps(max_steps: u32, count: u32, seed: u64) -> Result<Vec<u32>, AttackError> {
    if count > max_steps {
        return Err(AttackError::Config(format!(
            "cannot place {count} switches in {max_steps} steps"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps: Vec<u32> = index::sample(&mut rng, max_steps as usize, count as usize)
        .into_iter()
        .map(|i| i as u32 + 1)
        .collect();
    steps.sort_unstable();
    Ok(steps)
}

fn switch_at_random(
    world: &World,
    factory: &dyn AgentFactory,
    spec: &EpisodeSpec,
    config: &DilaConfig,
    count: u32,
    seed: u64,
) -> Result<DilaOutcome, AttackError> {
    check_episode(world, spec)?;
    let planned = sample_switch_steps(spec.max_steps, count, seed)?;
    let mut agent = factory.create(&world.scene, spec)?;
    let mut on = config.initial_on;
    let mut pose = world.scene.start;
    let mut trajectory = Trajectory::with_capacity(spec.max_steps as usize);
    let mut switch_steps = Vec::new();
    let mut planned = planned.into_iter().peekable();

    for t in 1..=spec.max_steps {
        if planned.next_if_eq(&t).is_some() {
            on = !on;
            switch_steps.push(t);
        }
        let level = config.level(on);
        let obs = world.render(&pose, level, spec.seed, t)?;
        let action = agent.act(&obs, spec)?;
        trajectory.push(pose, action, level);
        if action.is_stop() {
            break;
        }
        pose = transition(&pose, &action, &world.scene);
    }

    Ok(DilaOutcome {
        trajectory,
        switch_steps,
        lookahead_trace: Vec::new(),
        peek_queries: 0,
        on_level: config.on_level,
        initial_on: config.initial_on,
    })
}
