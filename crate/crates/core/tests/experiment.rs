use std::collections::BTreeMap;
use std::path::Path;

use lightattack::experiment::{
    bundled_suite_dir, reports_from_records, write_run, write_sweep, AttackKind, Experiment, ExperimentConfig,
    PipelineMode,
};
use lightattack::metrics::{Condition, EpisodeRecord};
use lightattack::report::{self, Manifest};
use lightattack::scene::parse_scene;

fn small(scenes: usize, seeds: Vec<u64>) -> ExperimentConfig {
    ExperimentConfig {
        scene_limit: Some(scenes),
        seeds,
        ..ExperimentConfig::default()
    }
}

fn by_condition(records: &[EpisodeRecord]) -> BTreeMap<Condition, Vec<&EpisodeRecord>> {
    let mut m: BTreeMap<Condition, Vec<&EpisodeRecord>> = BTreeMap::new();
    for r in records {
        m.entry(r.condition.clone()).or_default().push(r);
    }
    m
}

#[test]
fn cascade_copies_sila_when_it_already_broke_the_episode() {
    let mut config = small(12, vec![0, 1]);
    config.dila.random_trigger = true;
    let out = Experiment::prepare(config).unwrap().run("test").unwrap();
    let m = by_condition(&out.records);
    let sila = &m[&Condition::Sila];
    let combined = &m[&Condition::SilaDila];
    let random = &m[&Condition::Ablation("random_trigger".into())];
    assert_eq!(sila.len(), 24);
    assert_eq!(combined.len(), 24);
    assert_eq!(random.len(), 24);

    let mut ran_dila = 0;
    for ((s, c), r) in sila.iter().zip(combined).zip(random) {
        assert_eq!(s.episode_id, c.episode_id);
        assert_eq!(s.episode_id, r.episode_id);
        if !s.success {
            assert_eq!(c.success, s.success);
            assert_eq!(c.episode_length, s.episode_length);
            assert_eq!(c.rollouts_used, s.rollouts_used);
            assert_eq!(c.lighting, s.lighting);
            assert_eq!(c.peek_queries, 0);
        } else {
            ran_dila += 1;
            assert_eq!(c.rollouts_used, s.rollouts_used + 1);
            assert!(c.peek_queries > 0);
            assert!(c.lighting.starts_with("switched("), "{}", c.lighting);
        }
    }
    assert!(
        ran_dila > 0,
        "every SILA attempt failed; the cascade branch is untested"
    );

    let traced: Vec<&str> = out
        .episodes
        .iter()
        .filter_map(|e| e.dila.as_ref())
        .map(|d| d.episode_id.as_str())
        .collect();
    assert_eq!(traced.len(), ran_dila);
}

#[test]
fn independent_mode_runs_dila_everywhere() {
    let mut config = small(6, vec![0]);
    config.pipeline = PipelineMode::Independent;
    let out = Experiment::prepare(config).unwrap().run("test").unwrap();
    let sila_traces: Vec<_> = out.episodes.iter().map(|e| e.sila.as_ref().unwrap()).collect();
    let dila_count = out.episodes.iter().filter(|e| e.dila.is_some()).count();
    let nonzero = sila_traces.iter().filter(|s| s.l_star != 0.0).count();
    assert_eq!(dila_count, nonzero);
    let m = by_condition(&out.records);
    for (s, c) in m[&Condition::Sila].iter().zip(&m[&Condition::SilaDila]) {
        if c.rollouts_used != s.rollouts_used {
            assert_eq!(c.rollouts_used, s.rollouts_used + 1);
        }
    }
}

#[test]
fn standalone_dila_and_loss_ablation_conditions() {
    let mut config = small(3, vec![0]);
    config.attacks = vec![AttackKind::Dila, AttackKind::Sila, AttackKind::SilaDila];
    config.sila.loss = "unweighted".parse().unwrap();
    let out = Experiment::prepare(config).unwrap().run("test").unwrap();
    let conditions: Vec<String> = out.reports.iter().map(|r| r.condition.to_string()).collect();
    assert_eq!(
        conditions,
        vec![
            "clean",
            "dila",
            "ablation:sila_dila_unweighted",
            "ablation:sila_unweighted"
        ]
    );
}

#[test]
fn reports_are_recomputable_from_records() {
    let mut config = small(5, vec![0, 3]);
    config.dila.random_trigger = true;
    let out = Experiment::prepare(config).unwrap().run("test").unwrap();
    assert_eq!(reports_from_records("lightattack", &out.records).unwrap(), out.reports);
    let clean = &out.reports[0];
    assert_eq!(clean.condition, Condition::Clean);
    assert_eq!(clean.asr, None);
    assert!(out.reports[1..].iter().all(|r| r.asr.is_some()));
}

#[test]
fn output_directory_contents() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small(4, vec![2]);
    config.dump_trajectories = true;
    config.output = dir.path().to_path_buf();
    let exp = Experiment::prepare(config.clone()).unwrap();
    let out = exp.run("attack").unwrap();
    write_run(dir.path(), &out).unwrap();

    for f in [
        "records.jsonl",
        "summary.csv",
        "report.json",
        "sila_trace.jsonl",
        "manifest.json",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let dila_ran = out.episodes.iter().any(|e| e.dila.is_some());
    assert_eq!(dir.path().join("dila_trace.jsonl").is_file(), dila_ran);
    let traj = dir.path().join("trajectories").join("clean");
    assert_eq!(std::fs::read_dir(&traj).unwrap().count(), 4);

    let records = report::read_records(&dir.path().join("records.jsonl")).unwrap();
    assert_eq!(records, out.records);

    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("condition,asr,el,n,rollouts_mean"));
    assert!(lines.next().unwrap().starts_with("clean,undefined,"));

    let manifest: Manifest = report::read_json(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest.command, "attack");
    assert_eq!(manifest.seeds, vec![2]);
    assert_eq!(manifest.scenes, vec!["room00", "room01", "room02", "room03"]);
    assert_eq!(manifest.record_schema, lightattack::metrics::RECORD_SCHEMA_VERSION);
    assert_eq!(manifest.protocol_version, lightattack::bridge::PROTOCOL_VERSION);
    assert_eq!(manifest.config_sha256, config.config_hash());
    assert_eq!(manifest.suite_sha256.len(), 64);
    assert!(manifest.outputs.iter().any(|o| o == "records.jsonl"));
}

#[test]
fn sweep_writes_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small(4, vec![0]);
    config.sweep.from = 0.0;
    config.sweep.to = Some(1.0);
    config.sweep.step = 0.25;
    let out = Experiment::prepare(config).unwrap().sweep().unwrap();
    let levels: Vec<f64> = out.rows.iter().map(|r| r.intensity).collect();
    assert_eq!(levels, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert!(out.rows.iter().all(|r| r.n_episodes == 4 && r.n_success <= 4));
    // the bump profile blinds the agent in the dark
    assert_eq!(out.rows[0].n_success, 0);
    assert_eq!(out.rows[4].n_success, 4);
    write_sweep(dir.path(), &out).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn bench_config_loads_with_relative_suite() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/bench.toml");
    let config = ExperimentConfig::load(&path).unwrap();
    let exp = Experiment::prepare(config.clone()).unwrap();
    assert_eq!(exp.scenes.len(), 50);
    assert_eq!(config.seeds, vec![0, 1]);
    assert!(config.dila.random_trigger);
    assert_eq!(
        std::fs::canonicalize(config.suite_dir()).unwrap(),
        std::fs::canonicalize(bundled_suite_dir()).unwrap()
    );
}

#[test]
fn config_errors_are_classified() {
    let bad = |c: ExperimentConfig| Experiment::prepare(c).err().unwrap();
    assert!(bad(ExperimentConfig {
        seeds: vec![],
        ..Default::default()
    })
    .is_config());
    assert!(bad(ExperimentConfig {
        agent: "nobody".into(),
        ..Default::default()
    })
    .is_config());
    assert!(bad(ExperimentConfig {
        suite: "/no/such/dir".into(),
        ..Default::default()
    })
    .is_config());
    assert!(ExperimentConfig::from_toml_str("max_steps = 10\nbogus = 1\n")
        .err()
        .unwrap()
        .is_config());
}

#[test]
fn documented_scene_example_parses() {
    let doc =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/scene-format.md")).unwrap();
    let start = doc.find("```toml\n").unwrap() + "```toml\n".len();
    let end = start + doc[start..].find("```").unwrap();
    let scene = parse_scene(&doc[start..end], "scene-format.md").unwrap();
    assert_eq!(scene.id, "corridor");
    assert_eq!(scene.walls.len(), 1);
}
