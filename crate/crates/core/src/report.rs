//! On-disk outputs: JSONL records, CSV summaries, JSON reports and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::{EpisodeRecord, EvalReport, SweepRow, RECORD_SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: record schema v{got} is not supported (expected v{expected})")]
    Schema { path: PathBuf, got: u32, expected: u32 },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("records always serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), ReportError> {
    write_text(path, &to_jsonl(items))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ReportError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<EpisodeRecord>, ReportError> {
    let records: Vec<EpisodeRecord> = read_jsonl(path)?;
    if let Some(r) = records.iter().find(|r| r.schema != RECORD_SCHEMA_VERSION) {
        return Err(ReportError::Schema {
            path: path.to_path_buf(),
            got: r.schema,
            expected: RECORD_SCHEMA_VERSION,
        });
    }
    Ok(records)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    write_text(path, &to_json_pretty(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ReportError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

/// `condition,asr,el,n,rollouts_mean`, one row per report.
pub fn summary_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("condition,asr,el,n,rollouts_mean\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.condition,
            opt(r.asr),
            r.el_attack,
            r.n_episodes,
            r.rollouts_mean
        );
    }
    out
}

/// Human-readable table of the same numbers.
pub fn summary_table(reports: &[EvalReport]) -> String {
    let mut out = format!(
        "{:<28} {:>10} {:>10} {:>6} {:>10}\n",
        "condition", "ASR", "EL", "n", "rollouts"
    );
    for r in reports {
        let asr = r.asr.map_or_else(|| "UNDEFINED".to_string(), |a| format!("{a:.4}"));
        let _ = writeln!(
            out,
            "{:<28} {:>10} {:>10.2} {:>6} {:>10.2}",
            r.condition.to_string(),
            asr,
            r.el_attack,
            r.n_episodes,
            r.rollouts_mean
        );
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("intensity,success_rate,n_success,n_episodes\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.intensity, r.success_rate, r.n_success, r.n_episodes
        );
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything needed to reproduce a run. Contains no wall-clock data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub record_schema: u32,
    pub protocol_version: u32,
    pub command: String,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub scenes: Vec<String>,
    pub suite_sha256: String,
    pub outputs: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Condition;

    fn record(id: &str) -> EpisodeRecord {
        EpisodeRecord {
            schema: RECORD_SCHEMA_VERSION,
            episode_id: id.into(),
            scene_id: "s".into(),
            seed: 3,
            condition: Condition::SilaDila,
            success: false,
            episode_length: 42,
            lighting: "switched(on=1.1, start=on, flips=2)".into(),
            rollouts_used: 12,
            peek_queries: 30,
            invalid: None,
        }
    }

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let mut bad = record("b");
        bad.invalid = Some("timeout".into());
        let records = vec![record("a"), bad];
        write_jsonl(&path, &records).unwrap();
        assert_eq!(read_records(&path).unwrap(), records);
    }

    #[test]
    fn schema_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let mut r = record("a");
        r.schema = 99;
        write_jsonl(&path, &[r]).unwrap();
        assert!(matches!(read_records(&path), Err(ReportError::Schema { got: 99, .. })));
    }

    #[test]
    fn summary_marks_undefined() {
        let rep = EvalReport::build("t", &[record("a")], &[record("a")]).unwrap();
        let csv = summary_csv(&[rep]);
        assert_eq!(csv.lines().nth(1).unwrap(), "sila_dila,undefined,42,1,12");
    }

    #[test]
    fn hashes() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
