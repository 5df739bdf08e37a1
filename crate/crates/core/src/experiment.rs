//! Experiment configuration and the batch pipeline behind the CLI.
//!
//! Episodes are `(scene, seed)` pairs. Each one is evaluated under the clean
//! lighting and then under every requested attack; results are collected in
//! episode order, so output files do not depend on the worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{resolve_agent, AgentError, AgentFactory, AgentOptions};
use crate::dila::{dila_attack, random_trigger_baseline, DilaConfig, DilaOutcome, LookaheadRow};
use crate::episode::{run_episode, EpisodeError, EpisodeSpec, Trajectory, World};
use crate::loss::{GoalDistance, LossKind};
use crate::metrics::{
    intensity_sweep, random_intensity_baseline, Condition, EpisodeRecord, EvalReport, MetricsError, SweepRow,
};
use crate::render::DegradationProfile;
use crate::report::{self, sha256_hex, Manifest, ReportError};
use crate::scene::{load_suite, scene_to_toml, IntensityBounds, Scene, SceneError};
use crate::schedule::LightingSchedule;
use crate::sila::{sila_attack, AttackError, SilaConfig, SilaOutcome, SilaTraceRow};

/// Directory of the scene suite shipped with the crate.
pub fn bundled_suite_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets").join("suite")
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("agent: {0}")]
    Agent(AgentError),
    #[error("episode {episode_id}: {source}")]
    Episode { episode_id: String, source: AttackError },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl ExperimentError {
    /// Problems with the inputs rather than with running them.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_) | ExperimentError::Scene(_) | ExperimentError::Agent(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    RandomIntensity,
    Sila,
    SilaDila,
    Dila,
}

impl std::str::FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random_intensity" => Ok(AttackKind::RandomIntensity),
            "sila" => Ok(AttackKind::Sila),
            "sila_dila" => Ok(AttackKind::SilaDila),
            "dila" => Ok(AttackKind::Dila),
            _ => Err(format!("unknown attack {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    /// DILA only runs on episodes SILA did not break, with `on_level = l★`.
    #[default]
    Cascade,
    /// DILA runs on every episode with `on_level = l★`; the combined record is judged on the DILA rollout.
    Independent,
}

/// A preset name or an explicit effect list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Preset(String),
    Custom(DegradationProfile),
}

impl std::str::FromStr for PipelineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cascade" => Ok(PipelineMode::Cascade),
            "independent" => Ok(PipelineMode::Independent),
            _ => Err(format!("unknown pipeline mode {s:?}")),
        }
    }
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Preset("bump".into())
    }
}

impl ProfileSpec {
    pub fn resolve(&self) -> Result<DegradationProfile, ExperimentError> {
        match self {
            ProfileSpec::Preset(name) => DegradationProfile::preset(name)
                .ok_or_else(|| ExperimentError::Config(format!("unknown profile preset {name:?}"))),
            ProfileSpec::Custom(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SilaSettings {
    pub alpha: f64,
    pub iterations: u32,
    pub epsilon: f64,
    /// Defaults to the scene's nominal intensity.
    pub l0: Option<f64>,
    /// Defaults to the scene's intensity bounds.
    pub bounds: Option<IntensityBounds>,
    pub loss: LossKind,
    pub distance: GoalDistance,
}

impl Default for SilaSettings {
    fn default() -> Self {
        Self {
            alpha: SilaConfig::DEFAULT_ALPHA,
            iterations: SilaConfig::DEFAULT_ITERATIONS,
            epsilon: SilaConfig::DEFAULT_EPSILON,
            l0: None,
            bounds: None,
            loss: LossKind::default(),
            distance: GoalDistance::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DilaSettings {
    /// Defaults to SILA's `l★` (or the nominal intensity for a standalone DILA run).
    pub on_level: Option<f64>,
    pub switch_budget: Option<u32>,
    pub initial_on: bool,
    /// Also evaluate random switch placement with the same per-episode switch count.
    pub random_trigger: bool,
    /// Fixed switch count for the random-trigger ablation.
    pub random_count: Option<u32>,
}

impl Default for DilaSettings {
    fn default() -> Self {
        Self {
            on_level: None,
            switch_budget: None,
            initial_on: true,
            random_trigger: false,
            random_count: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub from: f64,
    /// Defaults to the smallest upper intensity bound in the suite.
    pub to: Option<f64>,
    pub step: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            from: 0.0,
            to: None,
            step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task_id: String,
    /// Scene directory; empty means the bundled suite.
    pub suite: PathBuf,
    /// Use only the first `n` scenes (sorted by file name).
    pub scene_limit: Option<usize>,
    pub agent: String,
    pub agent_options: AgentOptions,
    pub profile: ProfileSpec,
    pub max_steps: u32,
    pub seeds: Vec<u64>,
    pub attacks: Vec<AttackKind>,
    pub pipeline: PipelineMode,
    pub sila: SilaSettings,
    pub dila: DilaSettings,
    pub sweep: SweepSettings,
    pub output: PathBuf,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub dump_trajectories: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task_id: "lightattack".into(),
            suite: PathBuf::new(),
            scene_limit: None,
            agent: "goal_seeker".into(),
            agent_options: AgentOptions::default(),
            profile: ProfileSpec::default(),
            max_steps: 150,
            seeds: vec![0],
            attacks: vec![AttackKind::RandomIntensity, AttackKind::Sila, AttackKind::SilaDila],
            pipeline: PipelineMode::default(),
            sila: SilaSettings::default(),
            dila: DilaSettings::default(),
            sweep: SweepSettings::default(),
            output: PathBuf::from("out"),
            jobs: 0,
            dump_trajectories: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Loads a TOML config; a relative `suite` is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut config =
            Self::from_toml_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        if !config.suite.as_os_str().is_empty() && config.suite.is_relative() {
            if let Some(dir) = path.parent() {
                config.suite = dir.join(&config.suite);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let err = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.max_steps == 0 {
            return err("max_steps must be positive");
        }
        if self.seeds.is_empty() {
            return err("at least one seed is required");
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return err("seeds must be distinct");
        }
        if self.scene_limit == Some(0) {
            return err("scene_limit must be positive");
        }
        self.profile.resolve()?;
        Ok(())
    }

    pub fn suite_dir(&self) -> PathBuf {
        if self.suite.as_os_str().is_empty() {
            bundled_suite_dir()
        } else {
            self.suite.clone()
        }
    }

    /// Canonical JSON of every field that affects results (not `output` or `jobs`).
    pub fn canonical_json(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.output = PathBuf::new();
        c.jobs = 0;
        c.suite = PathBuf::new();
        let mut v = serde_json::to_value(&c).expect("config always serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output");
            map.remove("jobs");
            map.remove("suite");
        }
        v
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(self.canonical_json().to_string().as_bytes())
    }
}

/// Stable per-episode seed for one random stream.
pub fn derive_seed(base: u64, scene_id: &str, stream: &str) -> u64 {
    let digest = Sha256::digest(format!("{stream}/{scene_id}/{base}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilaTrace {
    pub episode_id: String,
    pub l_star: f64,
    pub found_failure: bool,
    pub iterations_used: u32,
    pub rollouts_used: u32,
    pub last_iterate: f64,
    pub trace: Vec<SilaTraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilaTrace {
    pub episode_id: String,
    pub on_level: f64,
    pub initial_on: bool,
    pub switch_steps: Vec<u32>,
    pub peek_queries: u32,
    pub lookahead_trace: Vec<LookaheadRow>,
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeResult {
    pub records: Vec<EpisodeRecord>,
    pub sila: Option<SilaTrace>,
    pub dila: Option<DilaTrace>,
    pub trajectories: Vec<(Condition, Trajectory)>,
}

pub struct Experiment {
    pub config: ExperimentConfig,
    pub scenes: Vec<Scene>,
    pub profile: DegradationProfile,
    pub factory: Arc<dyn AgentFactory>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub reports: Vec<EvalReport>,
    pub records: Vec<EpisodeRecord>,
    pub episodes: Vec<EpisodeResult>,
    pub manifest: Manifest,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub manifest: Manifest,
}

struct EpisodeCtx<'a> {
    world: World,
    spec: EpisodeSpec,
    episode_id: String,
    base_seed: u64,
    factory: &'a dyn AgentFactory,
}

impl EpisodeCtx<'_> {
    fn seed(&self, stream: &str) -> u64 {
        derive_seed(self.base_seed, &self.world.scene.id, stream)
    }

    fn record(&self, condition: Condition, trajectory: &Trajectory, lighting: String) -> EpisodeRecord {
        EpisodeRecord::completed(
            self.episode_id.clone(),
            self.base_seed,
            condition,
            &self.world,
            trajectory,
            lighting,
        )
    }

    fn invalid(&self, condition: Condition, reason: String) -> EpisodeRecord {
        EpisodeRecord::invalid(
            self.episode_id.clone(),
            self.world.scene.id.clone(),
            self.base_seed,
            condition,
            reason,
        )
    }
}

fn agent_failure(e: &AttackError) -> bool {
    matches!(e, AttackError::Episode(EpisodeError::Agent(_)))
}

fn with_condition(r: &EpisodeRecord, condition: Condition) -> EpisodeRecord {
    EpisodeRecord { condition, ..r.clone() }
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        let mut scenes = load_suite(config.suite_dir())?;
        if let Some(n) = config.scene_limit {
            scenes.truncate(n);
        }
        if scenes.is_empty() {
            return Err(ExperimentError::Config(format!(
                "no scenes in {}",
                config.suite_dir().display()
            )));
        }
        let profile = config.profile.resolve()?;
        let factory = resolve_agent(&config.agent, &config.agent_options).map_err(ExperimentError::Agent)?;
        Ok(Self {
            config,
            scenes,
            profile,
            factory,
        })
    }

    fn contexts(&self) -> Vec<EpisodeCtx<'_>> {
        let mut out = Vec::with_capacity(self.scenes.len() * self.config.seeds.len());
        for scene in &self.scenes {
            for &seed in &self.config.seeds {
                let spec = EpisodeSpec::new(
                    scene.id.clone(),
                    self.config.max_steps,
                    derive_seed(seed, &scene.id, "render"),
                );
                out.push(EpisodeCtx {
                    world: World::new(scene.clone(), self.profile.clone()),
                    spec,
                    episode_id: format!("{}#{seed}", scene.id),
                    base_seed: seed,
                    factory: self.factory.as_ref(),
                });
            }
        }
        out
    }

    fn pool(&self) -> Result<rayon::ThreadPool, ExperimentError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.jobs)
            .build()
            .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))
    }

    fn sila_condition(&self) -> Condition {
        match self.config.sila.loss {
            LossKind::TimestepWeighted => Condition::Sila,
            other => Condition::Ablation(format!("sila_{}", other.tag())),
        }
    }

    fn sila_dila_condition(&self) -> Condition {
        match self.config.sila.loss {
            LossKind::TimestepWeighted => Condition::SilaDila,
            other => Condition::Ablation(format!("sila_dila_{}", other.tag())),
        }
    }

    fn sila_config(&self, ctx: &EpisodeCtx<'_>) -> SilaConfig {
        let s = &self.config.sila;
        let scene = &ctx.world.scene;
        SilaConfig {
            l0: s.l0.unwrap_or(scene.nominal_intensity),
            alpha: s.alpha,
            iterations: s.iterations,
            epsilon: s.epsilon,
            bounds: s.bounds.unwrap_or(scene.intensity_bounds),
            rng_seed: ctx.seed("sila"),
            loss: s.loss,
            distance: s.distance,
        }
    }

    fn dila_config(&self, ctx: &EpisodeCtx<'_>, on_level: f64) -> DilaConfig {
        let d = &self.config.dila;
        DilaConfig {
            switch_budget: d.switch_budget,
            initial_on: d.initial_on,
            bounds: self.config.sila.bounds.unwrap_or(ctx.world.scene.intensity_bounds),
            ..DilaConfig::new(on_level)
        }
    }

    fn dila_record(
        &self,
        ctx: &EpisodeCtx<'_>,
        condition: Condition,
        out: &DilaOutcome,
        prior_rollouts: u32,
    ) -> Result<EpisodeRecord, AttackError> {
        let bounds = self.config.sila.bounds.unwrap_or(ctx.world.scene.intensity_bounds);
        let mut r = ctx.record(condition, &out.trajectory, out.schedule(bounds)?.summary());
        r.rollouts_used = prior_rollouts + 1;
        r.peek_queries = out.peek_queries;
        Ok(r)
    }

    fn run_one(&self, ctx: &EpisodeCtx<'_>) -> Result<EpisodeResult, ExperimentError> {
        let wrap = |source: AttackError| ExperimentError::Episode {
            episode_id: ctx.episode_id.clone(),
            source,
        };
        let mut result = EpisodeResult::default();
        let attacks = &self.config.attacks;
        let keep = |result: &mut EpisodeResult, c: &Condition, t: &Trajectory| {
            if self.config.dump_trajectories {
                result.trajectories.push((c.clone(), t.clone()));
            }
        };

        // clean
        let clean = (|| -> Result<(EpisodeRecord, Trajectory), AttackError> {
            let schedule =
                LightingSchedule::constant(ctx.world.scene.nominal_intensity, ctx.world.scene.intensity_bounds)
                    .map_err(|e| AttackError::Config(e.to_string()))?;
            let t = run_episode(ctx.factory, &ctx.world, &schedule, &ctx.spec)?;
            Ok((ctx.record(Condition::Clean, &t, schedule.summary()), t))
        })();
        match clean {
            Ok((r, t)) => {
                keep(&mut result, &Condition::Clean, &t);
                result.records.push(r);
            }
            Err(e) if agent_failure(&e) => result.records.push(ctx.invalid(Condition::Clean, e.to_string())),
            Err(e) => return Err(wrap(e)),
        }

        if attacks.contains(&AttackKind::RandomIntensity) {
            let bounds = self.config.sila.bounds.unwrap_or(ctx.world.scene.intensity_bounds);
            match random_intensity_baseline(
                &ctx.world,
                ctx.factory,
                &ctx.spec,
                &bounds,
                &ctx.episode_id,
                ctx.seed("random_intensity"),
            ) {
                Ok((mut r, t)) => {
                    r.seed = ctx.base_seed;
                    keep(&mut result, &Condition::RandomIntensity, &t);
                    result.records.push(r);
                }
                Err(MetricsError::Episode(EpisodeError::Agent(e))) => result
                    .records
                    .push(ctx.invalid(Condition::RandomIntensity, e.to_string())),
                Err(MetricsError::Episode(e)) => return Err(wrap(e.into())),
                Err(e) => return Err(e.into()),
            }
        }

        let needs_sila = attacks.contains(&AttackKind::Sila) || attacks.contains(&AttackKind::SilaDila);
        let mut sila: Option<(SilaOutcome, EpisodeRecord)> = None;
        let mut sila_invalid: Option<String> = None;
        if needs_sila {
            match sila_attack(&ctx.world, ctx.factory, &ctx.spec, &self.sila_config(ctx)) {
                Ok(out) => {
                    let mut r = ctx.record(
                        self.sila_condition(),
                        &out.final_trajectory,
                        format!("constant({})", out.l_star),
                    );
                    r.rollouts_used = out.rollouts_used;
                    result.sila = Some(SilaTrace {
                        episode_id: ctx.episode_id.clone(),
                        l_star: out.l_star,
                        found_failure: out.found_failure,
                        iterations_used: out.iterations_used,
                        rollouts_used: out.rollouts_used,
                        last_iterate: out.last_iterate,
                        trace: out.trace.clone(),
                    });
                    sila = Some((out, r));
                }
                Err(e) if agent_failure(&e) => sila_invalid = Some(e.to_string()),
                Err(e) => return Err(wrap(e)),
            }
        }
        if attacks.contains(&AttackKind::Sila) {
            match &sila {
                Some((out, r)) => {
                    keep(&mut result, &r.condition, &out.final_trajectory);
                    result.records.push(r.clone());
                }
                None => result
                    .records
                    .push(ctx.invalid(self.sila_condition(), sila_invalid.clone().unwrap_or_default())),
            }
        }

        if attacks.contains(&AttackKind::SilaDila) {
            let combined = self.sila_dila_condition();
            let random_cond = Condition::Ablation("random_trigger".into());
            match &sila {
                None => {
                    let reason = sila_invalid.clone().unwrap_or_default();
                    result.records.push(ctx.invalid(combined, reason.clone()));
                    if self.config.dila.random_trigger {
                        result.records.push(ctx.invalid(random_cond, reason));
                    }
                }
                Some((s, sr)) => {
                    let on_level = self.config.dila.on_level.unwrap_or(s.l_star);
                    let skip = (self.config.pipeline == PipelineMode::Cascade && s.found_failure) || on_level == 0.0;
                    if skip {
                        result.records.push(with_condition(sr, combined.clone()));
                        keep(&mut result, &combined, &s.final_trajectory);
                        if self.config.dila.random_trigger {
                            result.records.push(with_condition(sr, random_cond));
                        }
                    } else {
                        let cfg = self.dila_config(ctx, on_level);
                        let mut switches = self.config.dila.random_count;
                        match dila_attack(&ctx.world, ctx.factory, &ctx.spec, &cfg) {
                            Ok(out) => {
                                let r = self
                                    .dila_record(ctx, combined.clone(), &out, s.rollouts_used)
                                    .map_err(wrap)?;
                                keep(&mut result, &combined, &out.trajectory);
                                result.records.push(r);
                                switches.get_or_insert(out.switch_steps.len() as u32);
                                result.dila = Some(DilaTrace {
                                    episode_id: ctx.episode_id.clone(),
                                    on_level: out.on_level,
                                    initial_on: out.initial_on,
                                    switch_steps: out.switch_steps,
                                    peek_queries: out.peek_queries,
                                    lookahead_trace: out.lookahead_trace,
                                });
                            }
                            Err(e) if agent_failure(&e) => result.records.push(ctx.invalid(combined, e.to_string())),
                            Err(e) => return Err(wrap(e)),
                        }
                        if self.config.dila.random_trigger {
                            let count = switches.unwrap_or(0).min(self.config.max_steps);
                            match random_trigger_baseline(
                                &ctx.world,
                                ctx.factory,
                                &ctx.spec,
                                on_level,
                                count,
                                ctx.seed("random_trigger"),
                            ) {
                                Ok(out) => {
                                    let r = self
                                        .dila_record(ctx, random_cond.clone(), &out, s.rollouts_used)
                                        .map_err(wrap)?;
                                    keep(&mut result, &random_cond, &out.trajectory);
                                    result.records.push(r);
                                }
                                Err(e) if agent_failure(&e) => {
                                    result.records.push(ctx.invalid(random_cond, e.to_string()))
                                }
                                Err(e) => return Err(wrap(e)),
                            }
                        }
                    }
                }
            }
        }

        if attacks.contains(&AttackKind::Dila) {
            let on_level = self.config.dila.on_level.unwrap_or(ctx.world.scene.nominal_intensity);
            let cfg = self.dila_config(ctx, on_level);
            match dila_attack(&ctx.world, ctx.factory, &ctx.spec, &cfg) {
                Ok(out) => {
                    let r = self.dila_record(ctx, Condition::Dila, &out, 0).map_err(wrap)?;
                    keep(&mut result, &Condition::Dila, &out.trajectory);
                    result.records.push(r);
                    if result.dila.is_none() {
                        result.dila = Some(DilaTrace {
                            episode_id: ctx.episode_id.clone(),
                            on_level: out.on_level,
                            initial_on: out.initial_on,
                            switch_steps: out.switch_steps,
                            peek_queries: out.peek_queries,
                            lookahead_trace: out.lookahead_trace,
                        });
                    }
                }
                Err(e) if agent_failure(&e) => result.records.push(ctx.invalid(Condition::Dila, e.to_string())),
                Err(e) => return Err(wrap(e)),
            }
        }
        Ok(result)
    }

    /// Runs every episode under clean lighting and each configured attack.
    pub fn run(&self, command: &str) -> Result<RunOutput, ExperimentError> {
        let contexts = self.contexts();
        let episodes: Vec<EpisodeResult> = self.pool()?.install(|| {
            contexts
                .par_iter()
                .map(|ctx| self.run_one(ctx))
                .collect::<Result<_, _>>()
        })?;

        let mut by_condition: BTreeMap<Condition, Vec<EpisodeRecord>> = BTreeMap::new();
        for ep in &episodes {
            for r in &ep.records {
                by_condition.entry(r.condition.clone()).or_default().push(r.clone());
            }
        }
        let clean = by_condition.remove(&Condition::Clean).unwrap_or_default();
        let mut reports = vec![EvalReport::build(&self.config.task_id, &clean, &clean)?];
        let mut records = clean.clone();
        for (_, rs) in by_condition {
            reports.push(EvalReport::build(&self.config.task_id, &clean, &rs)?);
            records.extend(rs);
        }

        let mut outputs = vec!["records.jsonl", "summary.csv", "report.json"];
        if episodes.iter().any(|e| e.sila.is_some()) {
            outputs.push("sila_trace.jsonl");
        }
        if episodes.iter().any(|e| e.dila.is_some()) {
            outputs.push("dila_trace.jsonl");
        }
        Ok(RunOutput {
            reports,
            records,
            manifest: self.manifest(command, &outputs),
            episodes,
        })
    }

    /// Success rate per constant intensity across all episodes.
    pub fn sweep(&self) -> Result<SweepOutput, ExperimentError> {
        let s = &self.config.sweep;
        let to = s.to.unwrap_or_else(|| {
            self.scenes
                .iter()
                .map(|sc| sc.intensity_bounds.max)
                .fold(f64::INFINITY, f64::min)
        });
        let episodes: Vec<(World, EpisodeSpec)> = self.contexts().into_iter().map(|c| (c.world, c.spec)).collect();
        let factory = self.factory.as_ref();
        let rows = self
            .pool()?
            .install(|| intensity_sweep(&episodes, factory, s.from, to, s.step))?;
        Ok(SweepOutput {
            rows,
            manifest: self.manifest("sweep", &["sweep.csv"]),
        })
    }

    fn manifest(&self, command: &str, outputs: &[&str]) -> Manifest {
        let mut suite = String::new();
        for scene in &self.scenes {
            suite.push_str(&scene_to_toml(scene));
        }
        Manifest {
            tool: "lightattack".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            record_schema: crate::metrics::RECORD_SCHEMA_VERSION,
            protocol_version: crate::bridge::PROTOCOL_VERSION,
            command: command.into(),
            config_sha256: self.config.config_hash(),
            config: self.config.canonical_json(),
            seeds: self.config.seeds.clone(),
            scenes: self.scenes.iter().map(|s| s.id.clone()).collect(),
            suite_sha256: sha256_hex(suite.as_bytes()),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Writes the files listed in the manifest (plus trajectories when requested).
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<(), ExperimentError> {
    report::write_jsonl(&dir.join("records.jsonl"), &out.records)?;
    report::write_text(&dir.join("summary.csv"), &report::summary_csv(&out.reports))?;
    report::write_json(&dir.join("report.json"), &out.reports)?;
    let sila: Vec<&SilaTrace> = out.episodes.iter().filter_map(|e| e.sila.as_ref()).collect();
    if !sila.is_empty() {
        report::write_jsonl(&dir.join("sila_trace.jsonl"), &sila)?;
    }
    let dila: Vec<&DilaTrace> = out.episodes.iter().filter_map(|e| e.dila.as_ref()).collect();
    if !dila.is_empty() {
        report::write_jsonl(&dir.join("dila_trace.jsonl"), &dila)?;
    }
    for ep in &out.episodes {
        let Some(id) = ep.records.first().map(|r| r.episode_id.clone()) else {
            continue;
        };
        for (condition, t) in &ep.trajectories {
            let name = condition.to_string().replace(':', "_");
            let path = dir.join("trajectories").join(name).join(format!("{id}.csv"));
            report::write_text(&path, &t.to_csv())?;
        }
    }
    report::write_json(&dir.join("manifest.json"), &out.manifest)?;
    Ok(())
}

pub fn write_sweep(dir: &Path, out: &SweepOutput) -> Result<(), ExperimentError> {
    report::write_text(&dir.join("sweep.csv"), &report::sweep_csv(&out.rows))?;
    report::write_json(&dir.join("manifest.json"), &out.manifest)?;
    Ok(())
}

/// Rebuilds the per-condition reports from a `records.jsonl`.
pub fn reports_from_records(task_id: &str, records: &[EpisodeRecord]) -> Result<Vec<EvalReport>, ExperimentError> {
    let mut by_condition: BTreeMap<Condition, Vec<EpisodeRecord>> = BTreeMap::new();
    for r in records {
        by_condition.entry(r.condition.clone()).or_default().push(r.clone());
    }
    let clean = by_condition
        .remove(&Condition::Clean)
        .ok_or_else(|| ExperimentError::Config("records contain no clean condition".into()))?;
    let mut reports = vec![EvalReport::build(task_id, &clean, &clean)?];
    for (_, rs) in by_condition {
        reports.push(EvalReport::build(task_id, &clean, &rs)?);
    }
    Ok(reports)
}
