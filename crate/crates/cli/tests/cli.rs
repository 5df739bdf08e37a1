use std::path::Path;
use std::process::{Command, Output};

fn lightattack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lightattack"))
        .args(args)
        .env_remove("LIGHTATTACK_OUTPUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_clean_reports_undefined_asr() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("clean");
    let o = lightattack(&["run-clean", "--scenes", "3", "-o", out_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("clean")).unwrap();
    assert!(row.contains("UNDEFINED"), "{row}");
    assert!(!text.contains("sila"));
    assert!(out_dir.join("records.jsonl").is_file());
    assert!(out_dir.join("manifest.json").is_file());
}

#[test]
fn attack_then_report_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let o = lightattack(&[
        "attack",
        "--scenes",
        "4",
        "--seeds",
        "0,1",
        "--attack",
        "sila",
        "--attack",
        "sila_dila",
        "--random-trigger",
        "-j",
        "2",
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    for c in ["clean", "sila", "sila_dila", "ablation:random_trigger"] {
        assert!(
            table.lines().any(|l| l.split_whitespace().next() == Some(c)),
            "{c} missing:\n{table}"
        );
    }

    let r = lightattack(&["report", out_dir.to_str().unwrap()]);
    assert!(r.status.success(), "{}", stderr(&r));
    let recomputed = stdout(&r);
    let rows = |t: &str| {
        t.lines()
            .filter(|l| !l.starts_with("wrote"))
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    assert_eq!(rows(&recomputed), rows(&table));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_lightattack"))
        .args(["run-clean", "--scenes", "1"])
        .env("LIGHTATTACK_OUTPUT", &out_dir)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out_dir.join("records.jsonl").is_file());

    // an explicit flag wins over the environment
    let flag_dir = dir.path().join("from-flag");
    let o = Command::new(env!("CARGO_BIN_EXE_lightattack"))
        .args(["run-clean", "--scenes", "1", "-o", flag_dir.to_str().unwrap()])
        .env("LIGHTATTACK_OUTPUT", dir.path().join("unused"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(flag_dir.join("records.jsonl").is_file());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn sweep_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = lightattack(&[
        "sweep",
        "--scenes",
        "2",
        "--from",
        "0",
        "--to",
        "1",
        "--step",
        "0.5",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("intensity,success_rate,n_success,n_episodes\n"));
    assert_eq!(text.lines().filter(|l| l.contains(',')).count(), 4);
    assert!(dir.path().join("sweep.csv").is_file());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let suite = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets/suite");
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        format!(
            "task_id = \"t\"\nsuite = {:?}\nscene_limit = 2\nseeds = [5]\nattacks = [\"random_intensity\"]\n",
            suite.to_str().unwrap()
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let o = lightattack(&[
        "attack",
        "-c",
        config.to_str().unwrap(),
        "--seeds",
        "6",
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let records = std::fs::read_to_string(out_dir.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 4);
    assert!(records.lines().all(|l| l.contains("\"seed\":6")));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["run-clean", "--agent", "nobody", "-o", out],
        vec!["run-clean", "--profile", "sepia", "-o", out],
        vec!["run-clean", "--suite", "/no/such/suite", "-o", out],
        vec!["run-clean", "--config", "/no/such/config.toml", "-o", out],
        vec!["attack", "--scenes", "0", "-o", out],
        vec!["report", "/no/such/records.jsonl"],
    ] {
        let o = lightattack(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error: "), "{args:?}");
    }
    // argument parsing errors come from clap and use the same code
    assert_eq!(lightattack(&["attack", "--attack", "laser"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    let o = lightattack(&["run-clean", "--scenes", "1", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn failing_bridge_agent_yields_invalid_records() {
    let dir = tempfile::tempdir().unwrap();
    let o = lightattack(&[
        "run-clean",
        "--scenes",
        "2",
        "--agent",
        "bridge:/bin/false",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("2 episode record(s) marked invalid"),
        "{}",
        stderr(&o)
    );
}
