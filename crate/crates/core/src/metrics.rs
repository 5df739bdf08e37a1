//! Episode records, ASR/EL aggregation, the random-intensity baseline and the
//! intensity sweep.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentFactory;
use crate::episode::{run_episode, EpisodeError, EpisodeSpec, Trajectory, World};
use crate::scene::{quantize_intensity, IntensityBounds};
use crate::schedule::LightingSchedule;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("ASR is undefined: no episode succeeds in the clean environment")]
    UndefinedAsr,
    #[error("cannot average over an empty episode set")]
    Empty,
    #[error("attacked record {episode_id} (seed {seed}) has no matching clean record")]
    Unpaired { episode_id: String, seed: u64 },
    #[error("sweep step must be positive and the range non-empty")]
    BadGrid,
    #[error(transparent)]
    Episode(#[from] EpisodeError),
}

/// Evaluation condition of a record. Serialized as `clean`, `random_intensity`,
/// `sila`, `sila_dila`, `dila` or `ablation:<tag>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Condition {
    Clean,
    RandomIntensity,
    Sila,
    SilaDila,
    Dila,
    Ablation(String),
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Clean => f.write_str("clean"),
            Condition::RandomIntensity => f.write_str("random_intensity"),
            Condition::Sila => f.write_str("sila"),
            Condition::SilaDila => f.write_str("sila_dila"),
            Condition::Dila => f.write_str("dila"),
            Condition::Ablation(tag) => write!(f, "ablation:{tag}"),
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "clean" => Condition::Clean,
            "random_intensity" => Condition::RandomIntensity,
            "sila" => Condition::Sila,
            "sila_dila" => Condition::SilaDila,
            "dila" => Condition::Dila,
            other => match other.strip_prefix("ablation:") {
                Some(tag) if !tag.is_empty() => Condition::Ablation(tag.to_string()),
                _ => return Err(format!("unknown condition {other:?}")),
            },
        })
    }
}

impl From<Condition> for String {
    fn from(c: Condition) -> Self {
        c.to_string()
    }
}

impl TryFrom<String> for Condition {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub schema: u32,
    pub episode_id: String,
    pub scene_id: String,
    pub seed: u64,
    pub condition: Condition,
    pub success: bool,
    /// `T̂` of the rollout the condition is judged on.
    pub episode_length: u32,
    /// Lighting of that rollout, e.g. `constant(1.25)`.
    pub lighting: String,
    /// Full episode rollouts spent, including attack queries.
    pub rollouts_used: u32,
    /// One-step lookahead queries spent.
    pub peek_queries: u32,
    /// Set when the episode could not be completed (e.g. a broken agent session).
    /// Invalid records are excluded from ASR and EL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid: Option<String>,
}

impl EpisodeRecord {
    pub fn completed(
        episode_id: impl Into<String>,
        seed: u64,
        condition: Condition,
        world: &World,
        trajectory: &Trajectory,
        lighting: String,
    ) -> Self {
        Self {
            schema: RECORD_SCHEMA_VERSION,
            episode_id: episode_id.into(),
            scene_id: world.scene.id.clone(),
            seed,
            condition,
            success: trajectory.succeeded(&world.scene),
            episode_length: trajectory.len() as u32,
            lighting,
            rollouts_used: 1,
            peek_queries: 0,
            invalid: None,
        }
    }

    pub fn invalid(
        episode_id: impl Into<String>,
        scene_id: impl Into<String>,
        seed: u64,
        condition: Condition,
        reason: impl Into<String>,
    ) -> Self {
        Self {
            schema: RECORD_SCHEMA_VERSION,
            episode_id: episode_id.into(),
            scene_id: scene_id.into(),
            seed,
            condition,
            success: false,
            episode_length: 0,
            lighting: String::new(),
            rollouts_used: 0,
            peek_queries: 0,
            invalid: Some(reason.into()),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.invalid.is_none()
    }
}

/// Aggregate for one condition against the clean baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task_id: String,
    pub condition: Condition,
    pub n_episodes: usize,
    pub n_clean_success: usize,
    /// `None` when undefined (no clean successes, or no attack condition).
    pub asr: Option<f64>,
    pub el_clean: f64,
    pub el_attack: f64,
    pub rollouts_mean: f64,
    pub n_invalid: usize,
    pub records: Vec<EpisodeRecord>,
}

impl EvalReport {
    /// Builds the report for `attacked` against `clean`. For the clean
    /// condition itself ASR is reported as undefined.
    pub fn build(task_id: &str, clean: &[EpisodeRecord], attacked: &[EpisodeRecord]) -> Result<Self, MetricsError> {
        let condition = attacked.first().map_or(Condition::Clean, |r| r.condition.clone());
        let asr = if condition == Condition::Clean {
            None
        } else {
            match compute_asr(clean, attacked) {
                Ok(v) => Some(v),
                Err(MetricsError::UndefinedAsr) => None,
                Err(e) => return Err(e),
            }
        };
        let valid: Vec<&EpisodeRecord> = attacked.iter().filter(|r| r.is_valid()).collect();
        let rollouts_mean = if valid.is_empty() {
            0.0
        } else {
            valid.iter().map(|r| f64::from(r.rollouts_used)).sum::<f64>() / valid.len() as f64
        };
        Ok(Self {
            task_id: task_id.to_string(),
            condition,
            n_episodes: valid.len(),
            n_clean_success: clean.iter().filter(|r| r.is_valid() && r.success).count(),
            asr,
            el_clean: compute_el(clean).unwrap_or(f64::NAN),
            el_attack: compute_el(attacked).unwrap_or(f64::NAN),
            rollouts_mean,
            n_invalid: attacked.len() - valid.len(),
            records: attacked.to_vec(),
        })
    }

    pub fn success_rate(&self) -> f64 {
        let n = self.records.iter().filter(|r| r.is_valid()).count();
        if n == 0 {
            return f64::NAN;
        }
        self.records.iter().filter(|r| r.is_valid() && r.success).count() as f64 / n as f64
    }
}

/// Fraction of clean-success episodes that fail under attack.
///
/// Records pair by `episode_id`; every attacked record needs a clean record
/// with the same id and seed. Invalid records on either side drop the episode.
pub fn compute_asr(clean: &[EpisodeRecord], attacked: &[EpisodeRecord]) -> Result<f64, MetricsError> {
    let by_id: HashMap<&str, &EpisodeRecord> = clean.iter().map(|r| (r.episode_id.as_str(), r)).collect();
    let mut clean_success = 0usize;
    let mut broken = 0usize;
    for a in attacked {
        let c = by_id
            .get(a.episode_id.as_str())
            .filter(|c| c.seed == a.seed)
            .ok_or_else(|| MetricsError::Unpaired {
                episode_id: a.episode_id.clone(),
                seed: a.seed,
            })?;
        if !(c.is_valid() && a.is_valid()) || !c.success {
            continue;
        }
        clean_success += 1;
        if !a.success {
            broken += 1;
        }
    }
    if clean_success == 0 {
        return Err(MetricsError::UndefinedAsr);
    }
    Ok(broken as f64 / clean_success as f64)
}

/// Mean episode length over every valid record.
pub fn compute_el(records: &[EpisodeRecord]) -> Result<f64, MetricsError> {
    let lengths: Vec<f64> = records
        .iter()
        .filter(|r| r.is_valid())
        .map(|r| f64::from(r.episode_length))
        .collect();
    if lengths.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(lengths.iter().sum::<f64>() / lengths.len() as f64)
}

/// One uniform draw from `bounds`; a zero-width interval yields its lower end.
pub fn sample_uniform_intensity(bounds: &IntensityBounds, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.gen();
    if bounds.width() == 0.0 {
        bounds.min
    } else {
        bounds.clip(bounds.min + u * bounds.width())
    }
}

/// Single rollout under one intensity drawn uniformly from `bounds`.
pub fn random_intensity_baseline(
    world: &World,
    factory: &dyn AgentFactory,
    spec: &EpisodeSpec,
    bounds: &IntensityBounds,
    episode_id: &str,
    seed: u64,
) -> Result<(EpisodeRecord, Trajectory), MetricsError> {
    let level = sample_uniform_intensity(bounds, seed);
    let schedule = LightingSchedule::constant(level, *bounds).map_err(|e| EpisodeError::Config(e.to_string()))?;
    let trajectory = run_episode(factory, world, &schedule, spec)?;
    let record = EpisodeRecord::completed(
        episode_id,
        spec.seed,
        Condition::RandomIntensity,
        world,
        &trajectory,
        schedule.summary(),
    );
    Ok((record, trajectory))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub intensity: f64,
    pub success_rate: f64,
    pub n_success: usize,
    pub n_episodes: usize,
}

/// Grid `from, from + step, …, to` with points snapped to the intensity quantum.
pub fn sweep_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>, MetricsError> {
    if !(step > 0.0 && step.is_finite() && from.is_finite() && to.is_finite() && to >= from) {
        return Err(MetricsError::BadGrid);
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| quantize_intensity(from + i as f64 * step)).collect())
}

/// Success rate across `episodes` at each constant intensity of the grid.
pub fn intensity_sweep(
    episodes: &[(World, EpisodeSpec)],
    factory: &dyn AgentFactory,
    from: f64,
    to: f64,
    step: f64,
) -> Result<Vec<SweepRow>, MetricsError> {
    if episodes.is_empty() {
        return Err(MetricsError::Empty);
    }
    sweep_grid(from, to, step)?
        .into_par_iter()
        .map(|level| {
            let mut n_success = 0;
            for (world, spec) in episodes {
                let bounds = IntensityBounds::new(0.0, world.scene.intensity_bounds.max.max(level))
                    .map_err(|e| EpisodeError::Config(e.to_string()))?;
                let schedule =
                    LightingSchedule::constant(level, bounds).map_err(|e| EpisodeError::Config(e.to_string()))?;
                if run_episode(factory, world, &schedule, spec)?.succeeded(&world.scene) {
                    n_success += 1;
                }
            }
            Ok(SweepRow {
                intensity: level,
                success_rate: n_success as f64 / episodes.len() as f64,
                n_success,
                n_episodes: episodes.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, condition: Condition, success: bool, len: u32) -> EpisodeRecord {
        EpisodeRecord {
            schema: RECORD_SCHEMA_VERSION,
            episode_id: id.into(),
            scene_id: "s".into(),
            seed: 1,
            condition,
            success,
            episode_length: len,
            lighting: "constant(1)".into(),
            rollouts_used: 1,
            peek_queries: 0,
            invalid: None,
        }
    }

    #[test]
    fn asr_examples() {
        let clean: Vec<_> = (0..10)
            .map(|i| rec(&i.to_string(), Condition::Clean, true, 5))
            .collect();
        let attacked: Vec<_> = (0..10)
            .map(|i| rec(&i.to_string(), Condition::Sila, i >= 4, 5))
            .collect();
        assert_eq!(compute_asr(&clean, &attacked).unwrap(), 0.4);
        assert_eq!(compute_asr(&clean, &clean).unwrap(), 0.0);
        let all_fail: Vec<_> = (0..10)
            .map(|i| rec(&i.to_string(), Condition::Sila, false, 5))
            .collect();
        assert_eq!(compute_asr(&clean, &all_fail).unwrap(), 1.0);
    }

    #[test]
    fn asr_undefined_without_clean_success() {
        let clean = vec![rec("a", Condition::Clean, false, 3)];
        let attacked = vec![rec("a", Condition::Sila, false, 3)];
        assert!(matches!(
            compute_asr(&clean, &attacked),
            Err(MetricsError::UndefinedAsr)
        ));
    }

    #[test]
    fn asr_requires_pairing() {
        let clean = vec![rec("a", Condition::Clean, true, 3)];
        let mut other_seed = rec("a", Condition::Sila, false, 3);
        other_seed.seed = 2;
        assert!(matches!(
            compute_asr(&clean, &[other_seed]),
            Err(MetricsError::Unpaired { .. })
        ));
        assert!(matches!(
            compute_asr(&clean, &[rec("b", Condition::Sila, false, 3)]),
            Err(MetricsError::Unpaired { .. })
        ));
    }

    #[test]
    fn el_examples() {
        let r = |l| rec("x", Condition::Clean, true, l);
        assert_eq!(compute_el(&[r(100), r(200)]).unwrap(), 150.0);
        assert_eq!(compute_el(&[r(7)]).unwrap(), 7.0);
        assert_eq!(compute_el(&[r(9), r(9), r(9)]).unwrap(), 9.0);
        assert!(matches!(compute_el(&[]), Err(MetricsError::Empty)));
    }

    #[test]
    fn invalid_records_are_excluded() {
        let clean = vec![rec("a", Condition::Clean, true, 4), rec("b", Condition::Clean, true, 4)];
        let mut bad = EpisodeRecord::invalid("b", "s", 1, Condition::Sila, "malformed");
        bad.seed = 1;
        let attacked = vec![rec("a", Condition::Sila, false, 8), bad];
        assert_eq!(compute_asr(&clean, &attacked).unwrap(), 1.0);
        assert_eq!(compute_el(&attacked).unwrap(), 8.0);
    }

    #[test]
    fn condition_strings() {
        for c in [
            Condition::Clean,
            Condition::RandomIntensity,
            Condition::Sila,
            Condition::SilaDila,
            Condition::Dila,
            Condition::Ablation("final_step".into()),
        ] {
            assert_eq!(c.to_string().parse::<Condition>().unwrap(), c);
        }
        assert!("ablation:".parse::<Condition>().is_err());
        assert!("bogus".parse::<Condition>().is_err());
    }

    #[test]
    fn uniform_sampling() {
        let b = IntensityBounds::default();
        assert_eq!(sample_uniform_intensity(&b, 3), sample_uniform_intensity(&b, 3));
        let l = sample_uniform_intensity(&b, 3);
        assert!((0.0..=1.5).contains(&l));
        let flat = IntensityBounds::new(0.7, 0.7).unwrap();
        assert_eq!(sample_uniform_intensity(&flat, 3), 0.7);
    }

    #[test]
    fn grid_counts() {
        let g = sweep_grid(0.0, 2.0, 0.1).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[15], 1.5);
        assert_eq!(g[20], 2.0);
        assert!(sweep_grid(0.0, 1.0, 0.0).is_err());
        assert!(sweep_grid(1.0, 0.0, 0.1).is_err());
    }
}
