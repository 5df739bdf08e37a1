//! `lightattack`: run clean evaluations, attacks and intensity sweeps over a scene suite.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lightattack::experiment::{
    reports_from_records, write_run, write_sweep, AttackKind, Experiment, ExperimentConfig, ExperimentError,
    PipelineMode, ProfileSpec,
};
use lightattack::loss::LossKind;
use lightattack::report;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "lightattack", version, about = "Lighting attacks on navigation agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the agent under nominal lighting only.
    RunClean(Common),
    /// Evaluate the agent under clean lighting and the configured attacks.
    Attack {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        attack: AttackArgs,
    },
    /// Success rate as a function of constant intensity.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Recompute the summary from an existing records.jsonl.
    Report {
        /// Output directory of a previous run, or a records.jsonl file.
        path: PathBuf,
        #[arg(long, default_value = "lightattack")]
        task_id: String,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Scene directory (defaults to the bundled suite).
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Only use the first N scenes.
    #[arg(long)]
    scenes: Option<usize>,
    /// goal_seeker, threshold, scripted:<path> or bridge:<endpoint>.
    #[arg(long)]
    agent: Option<String>,
    /// Degradation preset: bump or identity.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    max_steps: Option<u32>,
    /// Comma-separated episode seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, short, env = "LIGHTATTACK_OUTPUT")]
    output: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, short)]
    jobs: Option<usize>,
    /// Also write per-step trajectory CSVs.
    #[arg(long)]
    dump_trajectories: bool,
}

#[derive(Args)]
struct AttackArgs {
    /// Attacks to run (repeatable): random_intensity, sila, sila_dila, dila.
    #[arg(long = "attack")]
    attacks: Vec<AttackKind>,
    #[arg(long)]
    pipeline: Option<PipelineMode>,
    /// timestep_weighted, unweighted or final_step.
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iterations: Option<u32>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    on_level: Option<f64>,
    #[arg(long)]
    switch_budget: Option<u32>,
    /// Add the random-trigger ablation next to SILA+DILA.
    #[arg(long)]
    random_trigger: bool,
}

fn base_config(common: &Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut c = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &common.suite {
        c.suite = v.clone();
    }
    if let Some(v) = common.scenes {
        c.scene_limit = Some(v);
    }
    if let Some(v) = &common.agent {
        c.agent = v.clone();
    }
    if let Some(v) = &common.profile {
        c.profile = ProfileSpec::Preset(v.clone());
    }
    if let Some(v) = common.max_steps {
        c.max_steps = v;
    }
    if let Some(v) = &common.seeds {
        c.seeds = v.clone();
    }
    if let Some(v) = &common.output {
        c.output = v.clone();
    }
    if let Some(v) = common.jobs {
        c.jobs = v;
    }
    c.dump_trajectories |= common.dump_trajectories;
    Ok(c)
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn run_experiment(config: ExperimentConfig, command: &str) -> Result<(), Failure> {
    let out_dir = config.output.clone();
    let experiment = Experiment::prepare(config)?;
    let out = experiment.run(command)?;
    write_run(&out_dir, &out)?;
    print!("{}", report::summary_table(&out.reports));
    let invalid: usize = out.reports.iter().map(|r| r.n_invalid).sum();
    if invalid > 0 {
        eprintln!("warning: {invalid} episode record(s) marked invalid");
    }
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn report_command(path: &Path, task_id: &str) -> Result<(), Failure> {
    let records_path = if path.is_dir() {
        path.join("records.jsonl")
    } else {
        path.to_path_buf()
    };
    let records = report::read_records(&records_path)
        .with_context(|| format!("reading {}", records_path.display()))
        .map_err(Failure::Config)?;
    let reports = reports_from_records(task_id, &records)?;
    print!("{}", report::summary_table(&reports));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::RunClean(common) => {
            let mut c = base_config(&common)?;
            c.attacks.clear();
            run_experiment(c, "run-clean")
        }
        Command::Attack { common, attack } => {
            let mut c = base_config(&common)?;
            if !attack.attacks.is_empty() {
                c.attacks = attack.attacks;
            }
            if let Some(v) = attack.pipeline {
                c.pipeline = v;
            }
            if let Some(v) = attack.loss {
                c.sila.loss = v;
            }
            if let Some(v) = attack.alpha {
                c.sila.alpha = v;
            }
            if let Some(v) = attack.iterations {
                c.sila.iterations = v;
            }
            if let Some(v) = attack.epsilon {
                c.sila.epsilon = v;
            }
            if let Some(v) = attack.on_level {
                c.dila.on_level = Some(v);
            }
            if let Some(v) = attack.switch_budget {
                c.dila.switch_budget = Some(v);
            }
            c.dila.random_trigger |= attack.random_trigger;
            if c.attacks.is_empty() {
                return Err(Failure::Config(anyhow::anyhow!("no attack selected")));
            }
            run_experiment(c, "attack")
        }
        Command::Sweep { common, from, to, step } => {
            let mut c = base_config(&common)?;
            if let Some(v) = from {
                c.sweep.from = v;
            }
            if to.is_some() {
                c.sweep.to = to;
            }
            if let Some(v) = step {
                c.sweep.step = v;
            }
            let out_dir = c.output.clone();
            let experiment = Experiment::prepare(c)?;
            let out = match experiment.sweep() {
                Ok(out) => out,
                Err(ExperimentError::Metrics(e)) => return Err(Failure::Config(e.into())),
                Err(e) => return Err(e.into()),
            };
            write_sweep(&out_dir, &out)?;
            print!("{}", report::sweep_csv(&out.rows));
            println!("wrote {}", out_dir.display());
            Ok(())
        }
        Command::Report { path, task_id } => report_command(&path, &task_id),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
