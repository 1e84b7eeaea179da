//! File formats, configuration and the parallel sweep around `muskat-core`.

pub mod config;
pub mod metrics_io;
pub mod output;
pub mod snapshot;
pub mod sweep;

pub use config::{parse_config, to_toml, ConfigError, ParsedConfig};
pub use metrics_io::{read_metrics, write_metrics};
pub use output::write_run;
pub use snapshot::{read_csv, read_vtk, write_csv, write_vtk, SnapshotData};
pub use sweep::epsilon_sweep;
