//! Donor-cell transport of density, viscosity and the heavy-phase marker.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{CellMask, FaceClass};
use crate::grid::{pairwise_sum, Field, Location, StaggeredGrid};

/// Initial two-layer data: heavy fluid above `interface_height` (small x2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialData {
    pub rho_plus: f64,
    pub rho_minus: f64,
    /// Solid density; `None` leaves solid cells out of the transported
    /// domain (rigid skeleton).
    pub rho_s: Option<f64>,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub interface_height: f64,
    /// Amplitude of the cosine seed on the interface, in cell heights.
    pub perturbation: f64,
    /// Periods of the seed across the domain.
    pub periods: usize,
}

impl InitialData {
    pub fn sharp(rho_plus: f64, rho_minus: f64, rho_s: Option<f64>, interface_height: f64) -> Self {
        Self { rho_plus, rho_minus, rho_s, mu_plus: 1.0, mu_minus: 1.0, interface_height, perturbation: 0.0, periods: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportState {
    pub rho: Field,
    pub mu: Field,
    /// Heavy-phase volume fraction, 1 in pure `ρ⁺` fluid.
    pub phase: Field,
    pub t: f64,
    pub dt: f64,
    pub cfl: f64,
    /// Cells taking part in the transport, row-major.
    pub domain: Vec<bool>,
    /// Extremes of the initial density over the domain.
    pub bounds: (f64, f64),
}

/// Layered initial state; cells cut by the seeded interface get the
/// corresponding volume fraction.
pub fn init_density(grid: &StaggeredGrid, mask: &CellMask, data: &InitialData) -> Result<TransportState> {
    if !(data.interface_height > 0.0 && data.interface_height < 1.0) {
        return Err(Error::InvalidParameter { name: "interface_height", reason: alloc::format!("{} is outside (0, 1)", data.interface_height) });
    }
    let mut rho = Field::zeros(grid, Location::Center);
    let mut mu = Field::zeros(grid, Location::Center);
    let mut phase = Field::zeros(grid, Location::Center);
    let mut domain = Vec::with_capacity(grid.nx * grid.ny);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let fluid = mask.is_fluid(i, j);
            domain.push(fluid || data.rho_s.is_some());
            if !fluid {
                rho[(i, j)] = data.rho_s.unwrap_or(0.0);
                continue;
            }
            let x1 = (i as f64 + 0.5) * grid.h1;
            let seed = data.perturbation * grid.h2 * libm::cos(2.0 * core::f64::consts::PI * data.periods as f64 * x1);
            let top = j as f64 * grid.h2;
            let heavy = ((data.interface_height + seed - top) / grid.h2).clamp(0.0, 1.0);
            phase[(i, j)] = heavy;
            rho[(i, j)] = data.rho_minus + heavy * (data.rho_plus - data.rho_minus);
            mu[(i, j)] = data.mu_minus + heavy * (data.mu_plus - data.mu_minus);
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (c, &d) in domain.iter().enumerate() {
        if d {
            let r = rho[(c % grid.nx, c / grid.nx)];
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    Ok(TransportState { rho, mu, phase, t: 0.0, dt: 0.0, cfl: 0.5, domain, bounds: (lo, hi) })
}

/// `max|u|/h1 + max|v|/h2`.
pub fn advective_rate(u: &Field, v: &Field, grid: &StaggeredGrid) -> f64 {
    u.max_abs() / grid.h1 + v.max_abs() / grid.h2
}

/// Largest CFL-admissible step, clamped to `[dt_min, dt_max]`.
pub fn choose_dt(u: &Field, v: &Field, grid: &StaggeredGrid, cfl: f64, dt_min: f64, dt_max: f64) -> f64 {
    let rate = advective_rate(u, v, grid);
    if rate == 0.0 {
        return dt_max;
    }
    (cfl / rate).clamp(dt_min, dt_max)
}

fn advect(f: &Field, u: &Field, v: &Field, grid: &StaggeredGrid, dt: f64) -> Field {
    let (cx, cy) = (dt / grid.h1, dt / grid.h2);
    let flux_u = |i: usize, j: usize| {
        let w = u[(i, j)];
        if w > 0.0 {
            w * f[(i - 1, j)]
        } else if w < 0.0 {
            w * f[(i, j)]
        } else {
            0.0
        }
    };
    let flux_v = |i: usize, j: usize| {
        let w = v[(i, j)];
        if w > 0.0 {
            w * f[(i, j - 1)]
        } else if w < 0.0 {
            w * f[(i, j)]
        } else {
            0.0
        }
    };
    let mut out = f.clone();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let fx = flux_u(i + 1, j) - flux_u(i, j);
            let fy = flux_v(i, j + 1) - flux_v(i, j);
            out[(i, j)] = f[(i, j)] - cx * fx - cy * fy;
        }
    }
    out
}

/// One explicit donor-cell step with `state.dt`.
pub fn upwind_step(state: &TransportState, u: &Field, v: &Field, grid: &StaggeredGrid, mask: &CellMask) -> Result<TransportState> {
    u.expect(grid, Location::UFace)?;
    v.expect(grid, Location::VFace)?;
    let rate = advective_rate(u, v, grid);
    if state.dt * rate > state.cfl * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt: state.dt, required: state.cfl / rate });
    }
    // Closed faces: outer boundary always, pore walls when the solid is not transported.
    let walls_closed = state.domain.iter().any(|d| !d);
    for (loc, f) in [(Location::UFace, u), (Location::VFace, v)] {
        let (ni, nj) = grid.dims(loc);
        for j in 0..nj {
            for i in 0..ni {
                let class = mask.face_class(loc, i, j);
                let closed = class == FaceClass::Outer || (class == FaceClass::Interface && walls_closed);
                if closed && f[(i, j)] != 0.0 {
                    return Err(Error::OpenBoundary { loc, i, j, value: f[(i, j)] });
                }
            }
        }
    }
    let mut next = state.clone();
    next.rho = advect(&state.rho, u, v, grid, state.dt);
    next.mu = advect(&state.mu, u, v, grid, state.dt);
    next.phase = advect(&state.phase, u, v, grid, state.dt);
    next.t = state.t + state.dt;
    Ok(next)
}

/// `Σ ρ h1 h2` over the transported cells, pairwise summed.
pub fn total_mass(state: &TransportState, grid: &StaggeredGrid) -> f64 {
    let values: Vec<f64> = (0..grid.nx * grid.ny)
        .filter(|&c| state.domain[c])
        .map(|c| state.rho[(c % grid.nx, c / grid.nx)] * grid.cell_area())
        .collect();
    pairwise_sum(&values)
}

/// Density extremes over the transported cells.
pub fn extrema(state: &TransportState, grid: &StaggeredGrid) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in 0..grid.nx * grid.ny {
        if state.domain[c] {
            let r = state.rho[(c % grid.nx, c / grid.nx)];
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

/// Checks `lo − tol ≤ ρ ≤ hi + tol` on the transported cells.
pub fn check_max_principle(state: &TransportState, grid: &StaggeredGrid, tol: f64) -> Result<()> {
    let (lo, hi) = state.bounds;
    let (a, b) = extrema(state, grid);
    if a < lo - tol {
        return Err(Error::MaxPrinciple { value: a, lo, hi });
    }
    if b > hi + tol {
        return Err(Error::MaxPrinciple { value: b, lo, hi });
    }
    Ok(())
}
