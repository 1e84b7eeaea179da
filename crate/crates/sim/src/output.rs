//! Writes a finished run to its output directory.

use std::fs;
use std::path::{Path, PathBuf};

use muskat_core::harness::{RunOutput, SnapshotFormat};

use crate::metrics_io::{write_metrics, MetricsError};
use crate::snapshot::{write_csv, write_vtk, SnapshotData, SnapshotError};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Dir { path: String, source: std::io::Error },
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// File stem of the `k`-th snapshot.
pub fn snapshot_stem(k: usize) -> String {
    format!("snapshot_{k:03}")
}

/// Writes `snapshot_NNN.{csv,vtk}` and `metrics.jsonl`; returns the paths.
pub fn write_run(out: &RunOutput, formats: &[SnapshotFormat], dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Dir { path: dir.display().to_string(), source })?;
    let mut written = Vec::new();
    for (k, snap) in out.snapshots.iter().enumerate() {
        let data = SnapshotData::from_snapshot(snap, &out.grid, &out.mask);
        for f in formats {
            let path = match f {
                SnapshotFormat::Csv => dir.join(format!("{}.csv", snapshot_stem(k))),
                SnapshotFormat::Vtk => dir.join(format!("{}.vtk", snapshot_stem(k))),
            };
            match f {
                SnapshotFormat::Csv => write_csv(&data, &path)?,
                SnapshotFormat::Vtk => write_vtk(&data, &path)?,
            }
            written.push(path);
        }
    }
    let path = dir.join("metrics.jsonl");
    write_metrics(&out.metrics, &path)?;
    written.push(path);
    Ok(written)
}
