//! Parallel ε-sweep and the shipped sensitivity presets.

use std::path::Path;

use muskat_core::harness::{run_scenario, sweep_member, Mode, ScenarioConfig, SnapshotFormat, SweepEntry, SweepReport};
use muskat_core::GeometryKind;
use rayon::prelude::*;

use crate::output::write_run;

fn pool(max_threads: Option<usize>) -> Result<rayon::ThreadPool, rayon::ThreadPoolBuildError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = max_threads {
        builder = builder.num_threads(k.max(1));
    }
    builder.build()
}

/// Runs `base` at every period count of `n_list` on at most `max_threads`
/// workers (`None`: one per core). Entries come back ordered by `n`.
pub fn epsilon_sweep(base: &ScenarioConfig, n_list: &[usize], max_threads: Option<usize>) -> Result<SweepReport, rayon::ThreadPoolBuildError> {
    let entries = pool(max_threads)?.install(|| n_list.par_iter().map(|&n| sweep_member(base, n)).collect());
    Ok(SweepReport::collate(entries))
}

/// Like [`epsilon_sweep`], also writing every run to `dir/n<N>/`.
pub fn epsilon_sweep_to(
    base: &ScenarioConfig,
    n_list: &[usize],
    max_threads: Option<usize>,
    dir: &Path,
    formats: &[SnapshotFormat],
) -> Result<SweepReport, rayon::ThreadPoolBuildError> {
    let run = |n: usize| -> SweepEntry {
        let out = match run_scenario(&base.with_periods(n)) {
            Ok(out) => out,
            Err(e) => return SweepEntry { n, metrics: None, error: Some(e.to_string()) },
        };
        let mut error = out.failure.as_ref().map(|e| e.to_string());
        if let Err(e) = write_run(&out, formats, &dir.join(format!("n{n}"))) {
            error.get_or_insert(e.to_string());
        }
        SweepEntry { n, metrics: Some(out.metrics), error }
    };
    let entries = pool(max_threads)?.install(|| n_list.par_iter().map(|&n| run(n)).collect());
    Ok(SweepReport::collate(entries))
}

/// Elastic runs at `λ0 ∈ {0.05, 0.5, 5}` with `δ = 1.25`.
pub fn lambda_presets(base: &ScenarioConfig) -> Vec<(String, ScenarioConfig)> {
    [0.05, 0.5, 5.0]
        .into_iter()
        .map(|l| {
            let mut c = base.clone();
            c.physics.mode = Mode::Elastic;
            c.physics.lambda0 = l;
            c.physics.rho_plus = 1.25 * c.physics.rho_minus;
            (format!("lambda_{l}"), c)
        })
        .collect()
}

/// Runs at `δ ∈ {1.01, 1.25, 5}` with the base `λ0`.
pub fn delta_presets(base: &ScenarioConfig) -> Vec<(String, ScenarioConfig)> {
    [1.01, 1.25, 5.0]
        .into_iter()
        .map(|d| {
            let mut c = base.clone();
            c.physics.rho_plus = d * c.physics.rho_minus;
            (format!("delta_{d}"), c)
        })
        .collect()
}

/// Reference scenario on the desk-scale grid (64 x 64, four periods) with the
/// output times of the published figures.
pub fn reference_case(mode: Mode, kind: GeometryKind) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.geometry.kind = kind;
    c.geometry.n = 4;
    c.geometry.cells_per_period = 16;
    c.physics.mode = mode;
    c.schedule.t_end = 4873.0;
    c.schedule.snapshot_times = vec![50.0, 860.0, 2631.0, 3012.0, 4873.0];
    c
}
