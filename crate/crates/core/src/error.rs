use alloc::string::String;
use alloc::vec::Vec;

use crate::grid::Location;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("staggering mismatch: expected {expected:?} field, got {found:?}")]
    Staggering { expected: Location, found: Location },
    #[error("field of shape {found:?} does not fit the grid for {loc:?}")]
    Shape { loc: Location, found: (usize, usize) },
    #[error("invalid grid {nx}x{ny}")]
    InvalidGrid { nx: usize, ny: usize },
    #[error("resolution too coarse: {cells} cells per period, at least 4 required")]
    ResolutionTooCoarse { cells: usize },
    #[error("{cells} cells cannot be split into {n} equal periods")]
    GridNotAligned { cells: usize, n: usize },
    #[error("pore strip narrower than one cell ({cells} fluid cells per period)")]
    StripTooThin { cells: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("{solver} did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { solver: &'static str, iterations: usize, residual: f64 },
    #[error("time step {dt:e} violates the CFL bound, need dt <= {required:e}")]
    Cfl { dt: f64, required: f64 },
    #[error("normal velocity {value:e} on a closed {loc:?} face ({i}, {j})")]
    OpenBoundary { loc: Location, i: usize, j: usize, value: f64 },
    #[error("missing Dirichlet data on {loc:?} face ({i}, {j})")]
    MissingDirichlet { loc: Location, i: usize, j: usize },
    #[error("boundary data carry net flux {flux:e} into solid block {block}")]
    IncompatibleData { block: usize, flux: f64 },
    #[error("coupling iteration did not converge, residual history {history:?}")]
    Coupling { history: Vec<f64> },
    #[error("maximum principle violated: value {value} outside [{lo}, {hi}]")]
    MaxPrinciple { value: f64, lo: f64, hi: f64 },
    #[error("divergence residual {residual:e} above tolerance {tol:e}")]
    Divergence { residual: f64, tol: f64 },
    #[error("snapshot schedules differ")]
    ScheduleMismatch,
}
