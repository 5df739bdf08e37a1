//! Static lighting attack: two-sided sign search over one constant intensity.
//!
//! Each iteration rolls the episode out at `clip(l ± α)`, returns immediately
//! if either candidate breaks the episode (brighter candidate first), and
//! otherwise moves the accumulated offset one step toward the candidate with
//! the larger trajectory loss. With probability ε the direction is reversed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentFactory;
use crate::episode::{run_episode, EpisodeError, EpisodeSpec, Trajectory, World};
use crate::loss::{trajectory_loss, GoalDistance, LossError, LossKind};
use crate::scene::{IntensityBounds, Scene};
use crate::schedule::LightingSchedule;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("attack configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

impl From<crate::render::RenderError> for AttackError {
    fn from(e: crate::render::RenderError) -> Self {
        AttackError::Episode(e.into())
    }
}

impl From<crate::agent::AgentError> for AttackError {
    fn from(e: crate::agent::AgentError) -> Self {
        AttackError::Episode(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilaConfig {
    /// Initial intensity `l⁰`.
    pub l0: f64,
    /// Step size `α`.
    pub alpha: f64,
    /// Iteration budget `K`.
    pub iterations: u32,
    /// Exploration rate `ε`.
    pub epsilon: f64,
    pub bounds: IntensityBounds,
    pub rng_seed: u64,
    pub loss: LossKind,
    pub distance: GoalDistance,
}

impl SilaConfig {
    pub const DEFAULT_ALPHA: f64 = 0.05;
    pub const DEFAULT_ITERATIONS: u32 = 20;
    pub const DEFAULT_EPSILON: f64 = 0.1;

    /// Defaults: `l⁰` = nominal intensity, α = 0.05, K = 20, ε = 0.1, bounds [0, 1.5].
    pub fn for_scene(scene: &Scene, rng_seed: u64) -> Self {
        Self {
            l0: scene.nominal_intensity,
            alpha: Self::DEFAULT_ALPHA,
            iterations: Self::DEFAULT_ITERATIONS,
            epsilon: Self::DEFAULT_EPSILON,
            bounds: IntensityBounds::default(),
            rng_seed,
            loss: LossKind::default(),
            distance: GoalDistance::default(),
        }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), AttackError> {
        let err = |m: String| Err(AttackError::Config(m));
        let b = self.bounds;
        if !(b.min < b.max) {
            return err(format!("bounds [{}, {}] must be non-degenerate", b.min, b.max));
        }
        if !(self.l0.is_finite() && b.contains(self.l0)) {
            return err(format!("l0 = {} outside bounds [{}, {}]", self.l0, b.min, b.max));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha <= b.width()) {
            return err(format!("alpha = {} must lie in (0, {}]", self.alpha, b.width()));
        }
        if self.iterations == 0 {
            return err("iterations must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return err(format!("epsilon = {} outside [0, 1]", self.epsilon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilaTraceRow {
    pub iteration: u32,
    pub l_plus: f64,
    pub l_minus: f64,
    pub j_plus: f64,
    pub j_minus: f64,
    /// `+1` when `j_plus ≥ j_minus`, else `−1`.
    pub xi: i8,
    /// Exploration sign; `None` when the iteration exited early on a failure.
    pub b: Option<i8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilaOutcome {
    /// Failing intensity if one was found, else the rolled-out intensity with the largest loss.
    pub l_star: f64,
    pub found_failure: bool,
    pub iterations_used: u32,
    pub rollouts_used: u32,
    /// `l⁰ + Δl` when the search ended.
    pub last_iterate: f64,
    /// Loss of the rollout at `l_star`.
    pub l_star_loss: f64,
    pub trace: Vec<SilaTraceRow>,
    /// Rollout at `l_star`.
    pub final_trajectory: Trajectory,
}

/// Sign with the tie broken toward `+1`.
pub fn loss_sign(j_plus: f64, j_minus: f64) -> i8 {
    if j_plus >= j_minus {
        1
    } else {
        -1
    }
}

struct Rollout {
    level: f64,
    trajectory: Trajectory,
    success: bool,
}

pub fn sila_attack(
    world: &World,
    factory: &dyn AgentFactory,
    spec: &EpisodeSpec,
    config: &SilaConfig,
) -> Result<SilaOutcome, AttackError> {
    config.validate()?;
    let bounds = config.bounds;
    let rollout = |level: f64| -> Result<Rollout, AttackError> {
        let schedule = LightingSchedule::constant(level, bounds).map_err(|e| AttackError::Config(e.to_string()))?;
        let trajectory = run_episode(factory, world, &schedule, spec)?;
        let success = trajectory.succeeded(&world.scene);
        Ok(Rollout {
            level,
            trajectory,
            success,
        })
    };
    let loss = |r: &Rollout| trajectory_loss(config.loss, &r.trajectory, &world.scene.goal, config.distance);

    let initial = rollout(config.l0)?;
    let mut rollouts_used = 1;
    if !initial.success {
        return Ok(SilaOutcome {
            l_star: config.l0,
            found_failure: true,
            iterations_used: 0,
            rollouts_used,
            last_iterate: config.l0,
            l_star_loss: loss(&initial)?,
            trace: Vec::new(),
            final_trajectory: initial.trajectory,
        });
    }

    let mut best_loss = loss(&initial)?;
    let mut best = initial;
    let mut offset = 0.0_f64;
    let offset_bounds = (bounds.min - config.l0, bounds.max - config.l0);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut trace = Vec::with_capacity(config.iterations as usize);

    for k in 1..=config.iterations {
        let current = config.l0 + offset;
        let l_plus = bounds.clip(current + config.alpha);
        let l_minus = bounds.clip(current - config.alpha);
        let (plus, minus) = rayon::join(|| rollout(l_plus), || rollout(l_minus));
        let (plus, minus) = (plus?, minus?);
        rollouts_used += 2;
        let (j_plus, j_minus) = (loss(&plus)?, loss(&minus)?);
        let xi = loss_sign(j_plus, j_minus);

        if !(plus.success && minus.success) {
            let (broken, j) = if !plus.success {
                (plus, j_plus)
            } else {
                (minus, j_minus)
            };
            trace.push(SilaTraceRow {
                iteration: k,
                l_plus,
                l_minus,
                j_plus,
                j_minus,
                xi,
                b: None,
            });
            return Ok(SilaOutcome {
                l_star: broken.level,
                found_failure: true,
                iterations_used: k,
                rollouts_used,
                last_iterate: current,
                l_star_loss: j,
                trace,
                final_trajectory: broken.trajectory,
            });
        }

        let u: f64 = rng.gen();
        let b: i8 = if u >= config.epsilon { 1 } else { -1 };
        offset = (offset + config.alpha * f64::from(b) * f64::from(xi))
            .max(offset_bounds.0)
            .min(offset_bounds.1);
        trace.push(SilaTraceRow {
            iteration: k,
            l_plus,
            l_minus,
            j_plus,
            j_minus,
            xi,
            b: Some(b),
        });

        for (candidate, j) in [(plus, j_plus), (minus, j_minus)] {
            if j > best_loss {
                best_loss = j;
                best = candidate;
            }
        }
    }

    Ok(SilaOutcome {
        l_star: best.level,
        found_failure: false,
        iterations_used: config.iterations,
        rollouts_used,
        last_iterate: config.l0 + offset,
        l_star_loss: best_loss,
        trace,
        final_trajectory: best.trajectory,
    })
}
