//! JSON-lines metrics: one object per snapshot, then one summary object.
//!
//! Every line carries `"record": "snapshot"` or `"record": "summary"`; the
//! remaining keys are the field names of `SnapshotMetrics` and `RunSummary`.

use std::fs;
use std::path::Path;

use muskat_core::metrics::{RunMetrics, RunSummary, SnapshotMetrics};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: {message}")]
    Layout { line: usize, message: String },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Snapshot(SnapshotMetrics),
    Summary(RunSummary),
}

pub fn to_json_lines(m: &RunMetrics) -> String {
    let mut s = String::new();
    for snap in &m.snapshots {
        s.push_str(&serde_json::to_string(&Line::Snapshot(snap.clone())).expect("metrics serialize"));
        s.push('\n');
    }
    s.push_str(&serde_json::to_string(&Line::Summary(m.summary.clone())).expect("metrics serialize"));
    s.push('\n');
    s
}

pub fn parse_json_lines(text: &str) -> Result<RunMetrics, MetricsError> {
    let mut snapshots = Vec::new();
    let mut summary = None;
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        if summary.is_some() {
            return Err(MetricsError::Layout { line: k + 1, message: "data after the summary line".into() });
        }
        match serde_json::from_str(line).map_err(|source| MetricsError::Json { line: k + 1, source })? {
            Line::Snapshot(s) => snapshots.push(s),
            Line::Summary(s) => summary = Some(s),
        }
    }
    let summary = summary.ok_or(MetricsError::Layout { line: text.lines().count(), message: "missing summary line".into() })?;
    Ok(RunMetrics { snapshots, summary })
}

pub fn write_metrics(m: &RunMetrics, path: &Path) -> Result<(), MetricsError> {
    fs::write(path, to_json_lines(m)).map_err(|source| MetricsError::Io { path: path.display().to_string(), source })
}

pub fn read_metrics(path: &Path) -> Result<RunMetrics, MetricsError> {
    let text = fs::read_to_string(path).map_err(|source| MetricsError::Io { path: path.display().to_string(), source })?;
    parse_json_lines(&text)
}
