//! Pore-scale two-phase Rayleigh–Taylor solver on a staggered (MAC) grid.
//!
//! Two skeleton models are supported: an absolutely rigid skeleton, where the
//! fluids obey a stationary Stokes system in the pore space and the density is
//! transported by donor-cell upwinding, and an elastic skeleton, where the
//! Stokes system is coupled to a Lamé system in the solid.
//!
//! Orientation: `x2` grows downward, so gravity acts along `+e2` and row
//! `j = 0` is the top of the domain.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod elastic;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod stokes;
pub mod transport;

mod saddle;
mod system;

pub use error::{Error, Result};
pub use geometry::{build_mask, classify_faces, CellMask, FaceClass, GeometryKind, SquaresConvention};
pub use grid::{BcKind, Field, Location, StaggeredGrid};
pub use saddle::{InnerSolver, IterationControl, PressureScheme, SolveDiagnostics};
