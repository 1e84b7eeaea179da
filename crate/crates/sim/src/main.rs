use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use muskat::{parse_config, read_metrics, write_run, ParsedConfig};
use muskat_core::harness::run_scenario;
use muskat_core::metrics::compare_modes;
use serde_json::json;

/// Pore-scale two-phase Rayleigh-Taylor simulator.
#[derive(Parser)]
#[command(name = "muskat", version)]
struct Cli {
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    max_threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run { config: PathBuf },
    /// Run a scenario at several period counts.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
    },
    /// Compare the metrics of a rigid and an elastic run.
    Compare { rigid: PathBuf, elastic: PathBuf },
    /// Check a configuration and list the defaults it receives.
    Validate { config: PathBuf },
}

const CONFIG_ERROR: u8 = 2;
const SOLVER_ERROR: u8 = 3;

fn load(path: &Path) -> Result<ParsedConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let say = |s: String| {
        if !cli.quiet {
            println!("{s}");
        }
    };
    match &cli.command {
        Command::Validate { config } => match load(config) {
            Ok(parsed) => {
                say(format!("{}: ok", config.display()));
                for line in &parsed.provenance {
                    say(format!("  default {line}"));
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(CONFIG_ERROR)
            }
        },
        Command::Run { config } => {
            let parsed = match load(config) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            };
            let cfg = parsed.config;
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let out = match run_scenario(&cfg) {
                Ok(out) => out,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            };
            if let Err(e) = write_run(&out, &cfg.output.formats, &dir) {
                eprintln!("{e}");
                return ExitCode::from(SOLVER_ERROR);
            }
            for s in &out.metrics.snapshots {
                say(format!("t = {:?}  width = {:.4}  mean height = {:.4}  displacement = {:.3e}", s.t, s.mixing_zone_width, s.interface_mean_height, s.interface_displacement));
            }
            match &out.failure {
                Some(e) => {
                    eprintln!("run stopped: {e}");
                    ExitCode::from(SOLVER_ERROR)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Command::Sweep { config, n } => {
            let parsed = match load(config) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            };
            let cfg = parsed.config;
            for &k in n {
                if let Err(e) = cfg.with_periods(k).validate().and_then(|_| {
                    let c = cfg.with_periods(k);
                    muskat_core::build_mask(c.geometry.kind, k, c.geometry.m, c.geometry.convention, &c.geometry.grid()?).map(|_| ())
                }) {
                    eprintln!("n = {k}: {e}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            }
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let report = match muskat::sweep::epsilon_sweep_to(&cfg, n, cli.max_threads, &dir, &cfg.output.formats) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(SOLVER_ERROR);
                }
            };
            let mut lines = String::new();
            let mut failed = false;
            for e in &report.entries {
                failed |= e.error.is_some();
                let curve: Vec<_> = e.metrics.iter().flat_map(|m| m.snapshots.iter().map(|s| json!([s.t, s.mixing_zone_width, s.interface_displacement]))).collect();
                lines.push_str(&json!({ "n": e.n, "error": e.error, "t_width_displacement": curve }).to_string());
                lines.push('\n');
                say(format!("n = {}: {}", e.n, e.error.as_deref().unwrap_or("ok")));
            }
            if let Err(e) = fs::create_dir_all(&dir).and_then(|_| fs::write(dir.join("sweep.jsonl"), lines)) {
                eprintln!("{}: {e}", dir.display());
                return ExitCode::from(SOLVER_ERROR);
            }
            if failed {
                ExitCode::from(SOLVER_ERROR)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Compare { rigid, elastic } => {
            let (a, b) = match (read_metrics(rigid), read_metrics(elastic)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    eprintln!("{e}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            };
            let cmp = match compare_modes(&a, &b) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            };
            say(format!("{:>10} {:>12} {:>12} {:>12} {:>12}", "t", "rigid w", "elastic w", "rigid d", "elastic d"));
            for r in &cmp.rows {
                say(format!("{:>10} {:>12.5} {:>12.5} {:>12.3e} {:>12.3e}", r.t, r.rigid_width, r.elastic_width, r.rigid_displacement, r.elastic_displacement));
            }
            say(format!("rigid mixing zone wider: {}", cmp.rigid_wider));
            say(format!("elastic interface steadier: {}", cmp.elastic_steadier));
            if let Some(dir) = &cli.out {
                let text = serde_json::to_string_pretty(&cmp).expect("comparison serializes");
                if let Err(e) = fs::create_dir_all(dir).and_then(|_| fs::write(dir.join("comparison.json"), text + "\n")) {
                    eprintln!("{}: {e}", dir.display());
                    return ExitCode::from(SOLVER_ERROR);
                }
            }
            ExitCode::SUCCESS
        }
    }
}
