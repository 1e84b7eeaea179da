//! Stationary Stokes solve in the pore space of a rigid skeleton.
//!
//! The discrete system is `−∇·(η∇v) + ∇p = g ρ e2`, `div v = 0` on the fluid
//! faces with no-slip on the outer boundary and on the pore walls, where
//! `η = μ1 ε² μ(x)` with `μ(x)` the advected phase viscosity.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::CellMask;
use crate::grid::{Field, Location, StaggeredGrid};
use crate::linalg::{jacobi, BandedLdl};
use crate::saddle::{IterationControl, InnerSolver, PressureSpace, Saddle, SolveDiagnostics};
use crate::system::{assemble, FaceSystem, NoSlipRules};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StokesParams {
    /// Multiplier of the viscosity field (the `μ1` of `μ1 ε²`).
    pub mu1: f64,
    /// Pore-size coefficient `ε` entering `μ1 ε²`.
    pub eps: f64,
    /// Body-force coefficient: the source is `gravity · ρ e2`.
    pub gravity: f64,
    pub control: IterationControl,
}

impl Default for StokesParams {
    fn default() -> Self {
        Self { mu1: 1.0, eps: 1.0, gravity: 1.0, control: IterationControl::default() }
    }
}

impl StokesParams {
    pub fn coefficient(&self) -> f64 {
        self.mu1 * self.eps * self.eps
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu1 > 0.0) {
            return Err(Error::InvalidParameter { name: "mu1", reason: "must be positive".into() });
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter { name: "eps", reason: "must be positive".into() });
        }
        if !self.gravity.is_finite() {
            return Err(Error::InvalidParameter { name: "gravity", reason: "must be finite".into() });
        }
        self.control.validate()
    }
}

/// Velocity components, pressure and solver report of one Stokes solve.
#[derive(Clone, Debug, PartialEq)]
pub struct StokesSolution {
    pub u: Field,
    pub v: Field,
    pub p: Field,
    pub diagnostics: SolveDiagnostics,
}

/// `g ρ` averaged to the unknown v-faces; zero for u-faces.
pub(crate) fn gravity_rhs(grid: &StaggeredGrid, sv: &FaceSystem, rho: &Field, gravity: f64) -> Vec<f64> {
    sv.faces
        .iter()
        .map(|&(i, j)| {
            let up = if j > 0 { Some(rho[(i, j - 1)]) } else { None };
            let down = if j < grid.ny { Some(rho[(i, j)]) } else { None };
            let face = match (up, down) {
                (Some(a), Some(b)) => 0.5 * (a + b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => 0.0,
            };
            gravity * face
        })
        .collect()
}

struct Rigid {
    su: FaceSystem,
    sv: FaceSystem,
    ps: PressureSpace,
    fu: Vec<f64>,
    fv: Vec<f64>,
}

fn check_inputs(grid: &StaggeredGrid, rho: &Field, visc: &Field, mask: &CellMask) -> Result<()> {
    rho.expect(grid, Location::Center)?;
    visc.expect(grid, Location::Center)?;
    if (mask.nx, mask.ny) != (grid.nx, grid.ny) {
        return Err(Error::InvalidGrid { nx: mask.nx, ny: mask.ny });
    }
    Ok(())
}

fn rigid(grid: &StaggeredGrid, rho: &Field, visc: &Field, mask: &CellMask, params: &StokesParams) -> Result<Rigid> {
    params.validate()?;
    check_inputs(grid, rho, visc, mask)?;
    let coef = params.coefficient();
    let eta: Vec<f64> = visc.interior().iter().map(|m| coef * m).collect();
    let rules = NoSlipRules { mask, eta: &eta };
    let su = assemble(grid, Location::UFace, &rules);
    let sv = assemble(grid, Location::VFace, &rules);
    let mut ps = PressureSpace::cells(grid, |i, j| mask.is_fluid(i, j), &eta);
    ps.connect(grid, &su, &sv);
    let fu = vec![0.0; su.len()];
    let fv = gravity_rhs(grid, &sv, rho, params.gravity);
    Ok(Rigid { su, sv, ps, fu, fv })
}

fn to_fields(grid: &StaggeredGrid, su: &FaceSystem, sv: &FaceSystem, xu: &[f64], xv: &[f64]) -> (Field, Field) {
    let mut u = Field::zeros(grid, Location::UFace);
    let mut v = Field::zeros(grid, Location::VFace);
    su.scatter(xu, &mut u);
    sv.scatter(xv, &mut v);
    (u, v)
}

/// Step 1: the pressure-free velocity `−∇·(η∇ṽ) = g ρ e2` with no-slip walls.
pub fn intermediate_velocity(grid: &StaggeredGrid, rho: &Field, visc: &Field, mask: &CellMask, params: &StokesParams) -> Result<(Field, Field, SolveDiagnostics)> {
    let sys = rigid(grid, rho, visc, mask, params)?;
    let mut diag = SolveDiagnostics::default();
    let mut solve = |s: &FaceSystem, b: &[f64]| -> Result<Vec<f64>> {
        let mut x = vec![0.0; s.len()];
        if s.is_empty() {
            return Ok(x);
        }
        match params.control.inner {
            InnerSolver::Direct => {
                x.copy_from_slice(b);
                BandedLdl::factor(&s.matrix)?.solve(&mut x);
                diag.inner_iterations += 1;
                diag.residual = diag.residual.max(s.matrix.residual_max(&x, b));
            }
            InnerSolver::Relaxation => {
                let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let tol = params.control.relax_tol * scale.max(f64::MIN_POSITIVE);
                let stats = jacobi(&s.matrix, b, &mut x, 0.9, tol, params.control.max_iters)?;
                diag.inner_iterations += stats.iterations;
                diag.residual = diag.residual.max(stats.residual);
            }
        }
        Ok(x)
    };
    let xu = solve(&sys.su, &sys.fu)?;
    let xv = solve(&sys.sv, &sys.fv)?;
    let (u, v) = to_fields(grid, &sys.su, &sys.sv, &xu, &xv);
    Ok((u, v, diag))
}

/// Steps 2 and 3: drive the pressure from `p_init` until `max |div v| ≤
/// div_tol`, starting from the intermediate velocity `vt`.
#[allow(clippy::too_many_arguments)]
pub fn pressure_velocity_iteration(
    grid: &StaggeredGrid,
    vt: (&Field, &Field),
    rho: &Field,
    visc: &Field,
    mask: &CellMask,
    params: &StokesParams,
    p_init: &Field,
) -> Result<StokesSolution> {
    let sys = rigid(grid, rho, visc, mask, params)?;
    vt.0.expect(grid, Location::UFace)?;
    vt.1.expect(grid, Location::VFace)?;
    p_init.expect(grid, Location::Center)?;
    let p0 = sys.ps.gather(p_init);
    let mut saddle = Saddle::new(grid, &sys.su, &sys.sv, &sys.ps, params.control, sys.fu.clone(), sys.fv.clone(), None)?;
    // The velocity of p0 is ṽ − K⁻¹ G p0; with p0 = 0 that is ṽ itself.
    let mut xu = sys.su.gather(vt.0);
    let mut xv = sys.sv.gather(vt.1);
    if p0.iter().any(|&x| x != 0.0) {
        let (gu, gv) = saddle.gradient(&p0);
        let (cu, cv) = corrections(&sys, &gu, &gv, params)?;
        xu.iter_mut().zip(cu).for_each(|(x, c)| *x -= c);
        xv.iter_mut().zip(cv).for_each(|(x, c)| *x -= c);
    }
    let sol = saddle.run(p0, Some((xu, xv)))?;
    finish(grid, &sys, sol, params)
}

fn corrections(sys: &Rigid, gu: &[f64], gv: &[f64], params: &StokesParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let solve = |s: &FaceSystem, b: &[f64]| -> Result<Vec<f64>> {
        let mut x = vec![0.0; s.len()];
        if s.is_empty() {
            return Ok(x);
        }
        match params.control.inner {
            InnerSolver::Direct => {
                x.copy_from_slice(b);
                BandedLdl::factor(&s.matrix)?.solve(&mut x);
            }
            InnerSolver::Relaxation => {
                let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                jacobi(&s.matrix, b, &mut x, 0.9, params.control.relax_tol * scale.max(f64::MIN_POSITIVE), params.control.max_iters)?;
            }
        }
        Ok(x)
    };
    Ok((solve(&sys.su, gu)?, solve(&sys.sv, gv)?))
}

fn finish(grid: &StaggeredGrid, sys: &Rigid, sol: crate::saddle::SaddleSolution, params: &StokesParams) -> Result<StokesSolution> {
    if sol.diagnostics.residual > params.control.div_tol {
        return Err(Error::Divergence { residual: sol.diagnostics.residual, tol: params.control.div_tol });
    }
    let (u, v) = to_fields(grid, &sys.su, &sys.sv, &sol.xu, &sol.xv);
    let p = sys.ps.scatter(grid, &sol.p);
    Ok(StokesSolution { u, v, p, diagnostics: sol.diagnostics })
}

/// Steps 1–3 in one call, warm-started from `p_init`.
pub fn stationary_stokes_solve(grid: &StaggeredGrid, rho: &Field, visc: &Field, mask: &CellMask, params: &StokesParams, p_init: &Field) -> Result<StokesSolution> {
    let sys = rigid(grid, rho, visc, mask, params)?;
    p_init.expect(grid, Location::Center)?;
    let p0 = sys.ps.gather(p_init);
    let mut saddle = Saddle::new(grid, &sys.su, &sys.sv, &sys.ps, params.control, sys.fu.clone(), sys.fv.clone(), None)?;
    let sol = saddle.run(p0, None)?;
    finish(grid, &sys, sol, params)
}
