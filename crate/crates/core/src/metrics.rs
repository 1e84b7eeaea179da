//! Diagnostics of the fluid–fluid interface: mixing-zone width, column
//! interface heights and pure-phase volumes.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::CellMask;
use crate::grid::{Field, StaggeredGrid};

/// Default threshold fraction of the mixing band.
pub const THETA: f64 = 0.05;

/// Row averages of `rho` over fluid cells, `None` for rows without fluid.
pub fn row_averages(rho: &Field, mask: &CellMask) -> Vec<Option<f64>> {
    (0..mask.ny)
        .map(|j| {
            let (mut s, mut n) = (0.0, 0usize);
            for i in 0..mask.nx {
                if mask.is_fluid(i, j) {
                    s += rho[(i, j)];
                    n += 1;
                }
            }
            (n > 0).then(|| s / n as f64)
        })
        .collect()
}

/// Length of `{x : lo < a + (b − a) x < hi}` for `x` in `[0, 1]`.
fn fraction_inside(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    if a == b {
        return if a > lo && a < hi { 1.0 } else { 0.0 };
    }
    let (s, e) = ((lo - a) / (b - a), (hi - a) / (b - a));
    let (s, e) = if s < e { (s, e) } else { (e, s) };
    (e.min(1.0) - s.max(0.0)).max(0.0)
}

/// Vertical extent of the band where the row-averaged density lies strictly
/// between `ρ⁻ + θΔρ` and `ρ⁺ − θΔρ`.
///
/// The profile is linear between row centers and constant above the first
/// and below the last center. Zero when `ρ⁺ = ρ⁻`.
pub fn mixing_zone_width(rho: &Field, mask: &CellMask, grid: &StaggeredGrid, rho_plus: f64, rho_minus: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 0.5) {
        return Err(Error::InvalidParameter { name: "theta", reason: alloc::format!("{theta} is outside (0, 0.5)") });
    }
    let drho = rho_plus - rho_minus;
    if drho == 0.0 {
        return Ok(0.0);
    }
    let profile: Vec<(f64, f64)> = row_averages(rho, mask)
        .into_iter()
        .enumerate()
        .filter_map(|(j, r)| r.map(|r| ((j as f64 + 0.5) * grid.h2, (r - rho_minus) / drho)))
        .collect();
    let Some(&(first, s_first)) = profile.first() else {
        return Ok(0.0);
    };
    let &(last, s_last) = profile.last().unwrap();
    let (lo, hi) = (theta, 1.0 - theta);
    let mut width = first * fraction_inside(s_first, s_first, lo, hi);
    width += (1.0 - last) * fraction_inside(s_last, s_last, lo, hi);
    for w in profile.windows(2) {
        let ((x0, s0), (x1, s1)) = (w[0], w[1]);
        width += (x1 - x0) * fraction_inside(s0, s1, lo, hi);
    }
    Ok(width)
}

/// Depth of the first downward crossing of `phase = ½` in every column,
/// interpolated between fluid-cell centers. `None` for columns without fluid.
pub fn interface_heights(phase: &Field, mask: &CellMask, grid: &StaggeredGrid) -> Vec<Option<f64>> {
    (0..mask.nx)
        .map(|i| {
            let cells: Vec<(f64, f64)> = (0..mask.ny).filter(|&j| mask.is_fluid(i, j)).map(|j| ((j as f64 + 0.5) * grid.h2, phase[(i, j)])).collect();
            let (&(top, s_top), rest) = cells.split_first()?;
            if s_top < 0.5 {
                return Some(top - 0.5 * grid.h2);
            }
            let mut prev = (top, s_top);
            for &(x, s) in rest {
                if s < 0.5 {
                    return Some(prev.0 + (x - prev.0) * (prev.1 - 0.5) / (prev.1 - s));
                }
                prev = (x, s);
            }
            Some(prev.0 + 0.5 * grid.h2)
        })
        .collect()
}

pub fn mean_height(heights: &[Option<f64>]) -> f64 {
    let (s, n) = heights.iter().flatten().fold((0.0, 0usize), |(s, n), h| (s + h, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Mean absolute column displacement between two height profiles.
pub fn mean_displacement(now: &[Option<f64>], initial: &[Option<f64>]) -> f64 {
    let (s, n) = now.iter().zip(initial).fold((0.0, 0usize), |(s, n), (a, b)| match (a, b) {
        (Some(a), Some(b)) => (s + (a - b).abs(), n + 1),
        _ => (s, n),
    });
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Areas of fluid cells with `phase ≥ 1 − θ` (heavy) and `phase ≤ θ` (light).
pub fn pure_phase_volumes(phase: &Field, mask: &CellMask, grid: &StaggeredGrid, theta: f64) -> (f64, f64) {
    let (mut heavy, mut light) = (0.0, 0.0);
    for j in 0..mask.ny {
        for i in 0..mask.nx {
            if mask.is_fluid(i, j) {
                let s = phase[(i, j)];
                if s >= 1.0 - theta {
                    heavy += grid.cell_area();
                } else if s <= theta {
                    light += grid.cell_area();
                }
            }
        }
    }
    (heavy, light)
}

/// Density rebuilt from the phase marker, `ρ⁻ + φ (ρ⁺ − ρ⁻)`.
pub fn phase_density(phase: &Field, rho_plus: f64, rho_minus: f64) -> Field {
    phase.map(|s| rho_minus + s * (rho_plus - rho_minus))
}

#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SnapshotMetrics {
    pub t: f64,
    pub step: usize,
    pub mixing_zone_width: f64,
    pub interface_mean_height: f64,
    pub interface_displacement: f64,
    pub interface_profile: Vec<Option<f64>>,
    pub heavy_volume: f64,
    pub light_volume: f64,
    pub total_mass: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Largest post-solve divergence residual since the previous snapshot.
    pub max_divergence: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunSummary {
    pub mode: String,
    /// Density ratio `ρ⁺/ρ⁻`.
    pub delta: f64,
    pub steps: usize,
    pub snapshots: usize,
    pub t_final: f64,
    /// `|M(t_final) − M(0)| / M(0)`.
    pub mass_drift: f64,
    pub max_divergence: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Message of the failure that ended the run early.
    pub failure: Option<String>,
    pub verdicts: RunVerdicts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunVerdicts {
    /// Every requested snapshot was written.
    pub completed: bool,
    /// Relative mass drift within `1e-12` per step.
    pub mass_conserved: bool,
    /// Post-solve divergence within the configured tolerance at every step.
    pub divergence_within_tol: bool,
}

#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunMetrics {
    pub snapshots: Vec<SnapshotMetrics>,
    pub summary: RunSummary,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonRow {
    pub t: f64,
    pub rigid_width: f64,
    pub elastic_width: f64,
    pub width_difference: f64,
    pub rigid_displacement: f64,
    pub elastic_displacement: f64,
    pub displacement_difference: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Rigid mixing zone wider than the elastic one at the last time.
    pub rigid_wider: bool,
    /// Elastic interface moved less than the rigid one at the last time.
    pub elastic_steadier: bool,
}

/// Per-time table of the two runs and the two verdicts at the final time.
pub fn compare_modes(rigid: &RunMetrics, elastic: &RunMetrics) -> Result<Comparison> {
    if rigid.snapshots.len() != elastic.snapshots.len() || rigid.snapshots.iter().zip(&elastic.snapshots).any(|(a, b)| a.t != b.t) {
        return Err(Error::ScheduleMismatch);
    }
    let rows: Vec<ComparisonRow> = rigid
        .snapshots
        .iter()
        .zip(&elastic.snapshots)
        .map(|(a, b)| ComparisonRow {
            t: a.t,
            rigid_width: a.mixing_zone_width,
            elastic_width: b.mixing_zone_width,
            width_difference: a.mixing_zone_width - b.mixing_zone_width,
            rigid_displacement: a.interface_displacement,
            elastic_displacement: b.interface_displacement,
            displacement_difference: a.interface_displacement - b.interface_displacement,
        })
        .collect();
    let (rigid_wider, elastic_steadier) = match rows.last() {
        Some(r) => (r.rigid_width > r.elastic_width, r.elastic_displacement < r.rigid_displacement),
        None => (false, false),
    };
    Ok(Comparison { rows, rigid_wider, elastic_steadier })
}

/// Columns of a height profile as plain numbers (NaN where absent).
pub fn profile_values(profile: &[Option<f64>]) -> Vec<f64> {
    profile.iter().map(|h| h.unwrap_or(f64::NAN)).collect()
}

