//! Pressure–velocity iteration shared by every incompressible solve.
//!
//! Velocity unknowns solve `K x = f − G p` with `K` one of the assembled
//! viscous operators; the pressure is driven until the divergence of the
//! velocity matches its target. Two drivers are available: the artificial
//! compressibility sweep `p ← p − Δτ c_p² div v` with growing `c_p`, and a
//! conjugate-gradient iteration on the same pressure Schur complement.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::CellMask;
use crate::grid::{Field, Location, StaggeredGrid};
use crate::linalg::{jacobi, BandedLdl};
use crate::system::FaceSystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PressureScheme {
    /// Pseudo-time sweeps `p ← p − Δτ c_p² div v`, `Δτ = h_min/(2 c_p)`.
    ArtificialCompressibility,
    /// Preconditioned conjugate gradients on the pressure Schur complement.
    #[default]
    Conjugate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum InnerSolver {
    /// Banded LDLᵀ factorization, exact up to round-off.
    #[default]
    Direct,
    /// Damped Jacobi sweeps to `relax_tol`.
    Relaxation,
}

/// Conjugate-gradient iterations without halving the residual before a
/// restart.
const STAGNATION: usize = 30;

/// Tolerances and the `c_p` policy of the pressure iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationControl {
    /// Required bound on the divergence residual.
    pub div_tol: f64,
    /// Residual the conjugate-gradient driver aims for; stagnation between
    /// this and `div_tol` is accepted.
    pub solve_tol: f64,
    pub relax_tol: f64,
    pub max_iters: usize,
    pub c_p: f64,
    pub c_p_growth: f64,
    pub c_p_max: f64,
    pub scheme: PressureScheme,
    pub inner: InnerSolver,
}

impl Default for IterationControl {
    fn default() -> Self {
        Self {
            div_tol: 1e-6,
            solve_tol: 1e-12,
            relax_tol: 1e-8,
            max_iters: 100_000,
            c_p: 1.0,
            c_p_growth: 1.5,
            c_p_max: 1e6,
            scheme: PressureScheme::Conjugate,
            inner: InnerSolver::Direct,
        }
    }
}

impl IterationControl {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| Err(Error::InvalidParameter { name, reason: reason.into() });
        if !(self.div_tol > 0.0) {
            return bad("div_tol", "must be positive");
        }
        if !(self.solve_tol > 0.0) {
            return bad("solve_tol", "must be positive");
        }
        if !(self.relax_tol > 0.0) {
            return bad("relax_tol", "must be positive");
        }
        if !(self.c_p > 0.0) || !(self.c_p_max >= self.c_p) {
            return bad("c_p", "need 0 < c_p <= c_p_max");
        }
        if !(self.c_p_growth >= 1.0) {
            return bad("c_p_growth", "must be at least 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters", "must be positive");
        }
        Ok(())
    }
}

/// What one incompressible solve reports.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveDiagnostics {
    /// Pressure updates performed.
    pub outer_iterations: usize,
    /// Velocity solves (direct) or relaxation sweeps (iterative).
    pub inner_iterations: usize,
    /// Final max |div v − target| over the pressure unknowns.
    pub residual: f64,
    /// Final artificial sound speed, when the sweep driver ran.
    pub final_c_p: Option<f64>,
}

impl SolveDiagnostics {
    pub fn absorb(&mut self, other: &SolveDiagnostics) {
        self.outer_iterations += other.outer_iterations;
        self.inner_iterations += other.inner_iterations;
        self.residual = self.residual.max(other.residual);
        if other.final_c_p.is_some() {
            self.final_c_p = other.final_c_p;
        }
    }
}

/// Pressure unknowns: single cells or aggregated cell groups.
#[derive(Clone, Debug)]
pub(crate) struct PressureSpace {
    pub cell_map: Vec<Option<usize>>,
    pub area: Vec<f64>,
    pub precond: Vec<f64>,
    pub component: Vec<usize>,
    pub n_components: usize,
}

impl PressureSpace {
    /// One unknown per selected cell, preconditioned by the cell coefficient.
    pub fn cells(grid: &StaggeredGrid, select: impl Fn(usize, usize) -> bool, eta: &[f64]) -> Self {
        let mut cell_map = vec![None; grid.nx * grid.ny];
        let mut area = Vec::new();
        let mut precond = Vec::new();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if select(i, j) {
                    let c = grid.cell_index(i, j);
                    cell_map[c] = Some(area.len());
                    area.push(grid.cell_area());
                    precond.push(eta[c]);
                }
            }
        }
        Self { cell_map, area, precond, component: Vec::new(), n_components: 0 }
    }

    /// Fluid cells plus one aggregated unknown per solid block.
    pub fn fluid_and_blocks(grid: &StaggeredGrid, mask: &CellMask, eta: &[f64]) -> (Self, usize) {
        let mut ps = Self::cells(grid, |i, j| mask.is_fluid(i, j), eta);
        let (labels, nblocks) = mask.solid_blocks();
        let first = ps.area.len();
        ps.area.extend(core::iter::repeat(0.0).take(nblocks));
        let mut perimeter = vec![0usize; nblocks];
        let mut eta_sum = vec![0.0; nblocks];
        for (c, l) in labels.iter().enumerate() {
            if let Some(b) = *l {
                ps.cell_map[c] = Some(first + b);
                ps.area[first + b] += grid.cell_area();
                let (i, j) = ((c % grid.nx) as isize, (c / grid.nx) as isize);
                for (a, bb) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                    if mask.cell(a, bb) == Some(true) {
                        perimeter[b] += 1;
                        eta_sum[b] += eta[grid.cell_index(a as usize, bb as usize)];
                    }
                }
            }
        }
        for b in 0..nblocks {
            let p = perimeter[b].max(1) as f64;
            let mean_eta = if perimeter[b] == 0 { 1.0 } else { eta_sum[b] / p };
            ps.precond.push(mean_eta * 4.0 * ps.area[first + b] / (p * grid.cell_area()));
        }
        (ps, first)
    }

    pub fn len(&self) -> usize {
        self.area.len()
    }

    /// Connected components of the pressure graph, edges being velocity
    /// unknowns that separate two distinct pressure unknowns.
    pub fn connect(&mut self, grid: &StaggeredGrid, su: &FaceSystem, sv: &FaceSystem) {
        let n = self.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (sys, loc) in [(su, Location::UFace), (sv, Location::VFace)] {
            for &(i, j) in &sys.faces {
                let (a, b) = face_cells(grid, loc, i, j);
                if let (Some(a), Some(b)) = (a.and_then(|c| self.cell_map[c]), b.and_then(|c| self.cell_map[c])) {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        self.component = (0..n)
            .map(|k| {
                let r = find(&mut parent, k);
                if label[r] == usize::MAX {
                    label[r] = count;
                    count += 1;
                }
                label[r]
            })
            .collect();
        self.n_components = count;
    }

    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.area).map(|((x, y), w)| x * y * w).sum()
    }

    /// Removes the area-weighted mean of every component.
    pub fn project(&self, x: &mut [f64]) {
        let mut sum = vec![0.0; self.n_components];
        let mut wt = vec![0.0; self.n_components];
        for k in 0..x.len() {
            sum[self.component[k]] += x[k] * self.area[k];
            wt[self.component[k]] += self.area[k];
        }
        for k in 0..x.len() {
            let c = self.component[k];
            x[k] -= sum[c] / wt[c];
        }
    }

    /// Pressure unknowns read from a center field (groups take their mean).
    pub fn gather(&self, p: &Field) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let mut count = vec![0usize; self.len()];
        let nx = p.dims().0;
        for (c, m) in self.cell_map.iter().enumerate() {
            if let Some(k) = *m {
                out[k] += p[(c % nx, c / nx)];
                count[k] += 1;
            }
        }
        for (o, n) in out.iter_mut().zip(count) {
            *o /= n.max(1) as f64;
        }
        out
    }

    pub fn scatter(&self, grid: &StaggeredGrid, x: &[f64]) -> Field {
        let mut p = Field::zeros(grid, Location::Center);
        for (c, m) in self.cell_map.iter().enumerate() {
            if let Some(k) = *m {
                p[(c % grid.nx, c / grid.nx)] = x[k];
            }
        }
        p
    }
}

/// Cells on the low and high side of a face (`None` outside the domain).
pub(crate) fn face_cells(grid: &StaggeredGrid, loc: Location, i: usize, j: usize) -> (Option<usize>, Option<usize>) {
    match loc {
        Location::UFace => (
            (i > 0).then(|| grid.cell_index(i - 1, j)),
            (i < grid.nx).then(|| grid.cell_index(i, j)),
        ),
        _ => (
            (j > 0).then(|| grid.cell_index(i, j - 1)),
            (j < grid.ny).then(|| grid.cell_index(i, j)),
        ),
    }
}

pub(crate) struct SaddleSolution {
    pub p: Vec<f64>,
    pub xu: Vec<f64>,
    pub xv: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

enum Factor {
    Direct(BandedLdl, BandedLdl),
    Relax,
}

/// One incompressible solve: operators, forcing and pressure space.
pub(crate) struct Saddle<'a> {
    pub grid: &'a StaggeredGrid,
    pub su: &'a FaceSystem,
    pub sv: &'a FaceSystem,
    pub ps: &'a PressureSpace,
    pub ctrl: IterationControl,
    /// Right-hand sides for the velocity unknowns (all known contributions).
    pub fu: Vec<f64>,
    pub fv: Vec<f64>,
    /// Divergence of the known (non-unknown) face values, per pressure unknown.
    pub div_base: Vec<f64>,
    /// Target divergence per pressure unknown.
    pub target: Vec<f64>,
    factor: Factor,
    inner: usize,
}

impl<'a> Saddle<'a> {
    pub fn new(
        grid: &'a StaggeredGrid,
        su: &'a FaceSystem,
        sv: &'a FaceSystem,
        ps: &'a PressureSpace,
        ctrl: IterationControl,
        fu: Vec<f64>,
        fv: Vec<f64>,
        base: Option<(&Field, &Field)>,
    ) -> Result<Self> {
        ctrl.validate()?;
        let factor = match ctrl.inner {
            InnerSolver::Direct => Factor::Direct(BandedLdl::factor(&su.matrix)?, BandedLdl::factor(&sv.matrix)?),
            InnerSolver::Relaxation => Factor::Relax,
        };
        let n = ps.len();
        let mut s = Self { grid, su, sv, ps, ctrl, fu, fv, div_base: vec![0.0; n], target: vec![0.0; n], factor, inner: 0 };
        if let Some((bu, bv)) = base {
            s.div_base = s.divergence_of_fields(bu, bv, true);
        }
        Ok(s)
    }

    /// Per-unknown divergence of full face fields. With `skip_unknowns` only
    /// the faces that are not velocity unknowns contribute.
    fn divergence_of_fields(&self, u: &Field, v: &Field, skip_unknowns: bool) -> Vec<f64> {
        let mut acc = vec![0.0; self.ps.len()];
        let g = self.grid;
        for (loc, f, sys, len) in [(Location::UFace, u, self.su, g.h2), (Location::VFace, v, self.sv, g.h1)] {
            let (ni, nj) = g.dims(loc);
            for j in 0..nj {
                for i in 0..ni {
                    if skip_unknowns && sys.id(i, j).is_some() {
                        continue;
                    }
                    let flux = f[(i, j)] * len;
                    if flux == 0.0 {
                        continue;
                    }
                    let (lo, hi) = face_cells(g, loc, i, j);
                    if let Some(k) = lo.and_then(|c| self.ps.cell_map[c]) {
                        acc[k] += flux;
                    }
                    if let Some(k) = hi.and_then(|c| self.ps.cell_map[c]) {
                        acc[k] -= flux;
                    }
                }
            }
        }
        for (a, w) in acc.iter_mut().zip(&self.ps.area) {
            *a /= w;
        }
        acc
    }

    /// Divergence contributed by the velocity unknowns alone.
    fn div_linear(&self, xu: &[f64], xv: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.ps.len()];
        let g = self.grid;
        for (loc, x, sys, len) in [(Location::UFace, xu, self.su, g.h2), (Location::VFace, xv, self.sv, g.h1)] {
            for (&(i, j), &val) in sys.faces.iter().zip(x) {
                let flux = val * len;
                let (lo, hi) = face_cells(g, loc, i, j);
                let lo = lo.and_then(|c| self.ps.cell_map[c]);
                let hi = hi.and_then(|c| self.ps.cell_map[c]);
                if lo == hi {
                    continue;
                }
                if let Some(k) = lo {
                    acc[k] += flux;
                }
                if let Some(k) = hi {
                    acc[k] -= flux;
                }
            }
        }
        for (a, w) in acc.iter_mut().zip(&self.ps.area) {
            *a /= w;
        }
        acc
    }

    /// Residual `target − div v`.
    pub fn residual(&self, xu: &[f64], xv: &[f64]) -> Vec<f64> {
        let d = self.div_linear(xu, xv);
        d.iter().zip(&self.div_base).zip(&self.target).map(|((d, b), t)| t - (d + b)).collect()
    }

    /// Pressure gradient on the velocity unknowns.
    pub fn gradient(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = self.grid;
        let mut out = [Vec::new(), Vec::new()];
        for (n, (loc, sys, h)) in [(Location::UFace, self.su, g.h1), (Location::VFace, self.sv, g.h2)].into_iter().enumerate() {
            out[n] = sys
                .faces
                .iter()
                .map(|&(i, j)| {
                    let (lo, hi) = face_cells(g, loc, i, j);
                    let pl = lo.and_then(|c| self.ps.cell_map[c]).map_or(0.0, |k| p[k]);
                    let ph = hi.and_then(|c| self.ps.cell_map[c]).map_or(0.0, |k| p[k]);
                    (ph - pl) / h
                })
                .collect();
        }
        let [a, b] = out;
        (a, b)
    }

    fn solve_component(&mut self, which: usize, b: &[f64], x: &mut [f64]) -> Result<()> {
        match &self.factor {
            Factor::Direct(lu, lv) => {
                x.copy_from_slice(b);
                if which == 0 { lu } else { lv }.solve(x);
                self.inner += 1;
            }
            Factor::Relax => {
                let sys = if which == 0 { self.su } else { self.sv };
                let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let tol = self.ctrl.relax_tol * scale.max(f64::MIN_POSITIVE);
                let stats = jacobi(&sys.matrix, b, x, 0.9, tol, self.ctrl.max_iters)?;
                self.inner += stats.iterations;
            }
        }
        Ok(())
    }

    /// Velocity for the pressure `p`, warm-started from `xu`, `xv`.
    fn velocity(&mut self, p: &[f64], xu: &mut [f64], xv: &mut [f64]) -> Result<()> {
        let (gu, gv) = self.gradient(p);
        let bu: Vec<f64> = self.fu.iter().zip(&gu).map(|(f, g)| f - g).collect();
        let bv: Vec<f64> = self.fv.iter().zip(&gv).map(|(f, g)| f - g).collect();
        self.solve_component(0, &bu, xu)?;
        self.solve_component(1, &bv, xv)
    }

    fn max_abs(x: &[f64]) -> f64 {
        x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Runs the pressure iteration from `p0`. `v0`, when given, must be the
    /// velocity belonging to `p0`.
    pub fn run(&mut self, p0: Vec<f64>, v0: Option<(Vec<f64>, Vec<f64>)>) -> Result<SaddleSolution> {
        self.inner = 0;
        let mut p = p0;
        let (mut xu, mut xv) = match v0 {
            Some(v) => v,
            None => {
                let mut xu = vec![0.0; self.su.len()];
                let mut xv = vec![0.0; self.sv.len()];
                self.velocity(&p, &mut xu, &mut xv)?;
                (xu, xv)
            }
        };
        let (outer, final_c_p) = match self.ctrl.scheme {
            PressureScheme::ArtificialCompressibility => {
                let (o, c) = self.sweeps(&mut p, &mut xu, &mut xv)?;
                (o, Some(c))
            }
            PressureScheme::Conjugate => (self.conjugate(&mut p, &mut xu, &mut xv)?, None),
        };
        // The gauge shift does not move the velocity.
        self.ps.project(&mut p);
        let residual = Self::max_abs(&self.residual(&xu, &xv));
        Ok(SaddleSolution {
            p,
            xu,
            xv,
            diagnostics: SolveDiagnostics { outer_iterations: outer, inner_iterations: self.inner, residual, final_c_p },
        })
    }

    fn sweeps(&mut self, p: &mut [f64], xu: &mut [f64], xv: &mut [f64]) -> Result<(usize, f64)> {
        let h = self.grid.h_min();
        let cap = self.ctrl.c_p_max.min(2.0 / h).max(self.ctrl.c_p);
        let mut cp = self.ctrl.c_p;
        let mut r = self.residual(xu, xv);
        let mut res = Self::max_abs(&r);
        let mut it = 0;
        while res > self.ctrl.div_tol {
            if it >= self.ctrl.max_iters {
                return Err(Error::NonConvergence { solver: "artificial compressibility", iterations: it, residual: res });
            }
            let dtau = h / (2.0 * cp);
            let omega = dtau * cp * cp;
            for k in 0..p.len() {
                p[k] += omega * self.ps.precond[k] * r[k];
            }
            self.velocity(p, xu, xv)?;
            r = self.residual(xu, xv);
            let next = Self::max_abs(&r);
            cp = if next > res { (cp / (self.ctrl.c_p_growth * self.ctrl.c_p_growth)).max(self.ctrl.c_p) } else { (cp * self.ctrl.c_p_growth).min(cap) };
            res = next;
            it += 1;
        }
        Ok((it, cp))
    }

    fn conjugate(&mut self, p: &mut [f64], xu: &mut [f64], xv: &mut [f64]) -> Result<usize> {
        let n = p.len();
        let tol = self.ctrl.solve_tol.min(self.ctrl.div_tol);
        let mut it = 0;
        let mut r = self.residual(xu, xv);
        let mut res = Self::max_abs(&r);
        let mut stall = 0;
        'restart: while res > tol {
            let precondition = |ps: &PressureSpace, r: &[f64]| {
                let mut z: Vec<f64> = r.iter().zip(&ps.precond).map(|(r, m)| r * m).collect();
                ps.project(&mut z);
                z
            };
            let mut z = precondition(self.ps, &r);
            let mut d = z.clone();
            let mut rz = self.ps.dot(&r, &z);
            let mut du = vec![0.0; xu.len()];
            let mut dv = vec![0.0; xv.len()];
            let start = res;
            let (mut best, mut since_best) = (res, 0);
            loop {
                if it >= self.ctrl.max_iters {
                    if res <= self.ctrl.div_tol {
                        return Ok(it);
                    }
                    return Err(Error::NonConvergence { solver: "pressure conjugate gradients", iterations: it, residual: res });
                }
                it += 1;
                let (gu, gv) = self.gradient(&d);
                du.iter_mut().for_each(|x| *x = 0.0);
                dv.iter_mut().for_each(|x| *x = 0.0);
                self.solve_component(0, &gu, &mut du)?;
                self.solve_component(1, &gv, &mut dv)?;
                let q: Vec<f64> = self.div_linear(&du, &dv).iter().map(|x| -x).collect();
                let dq = self.ps.dot(&d, &q);
                if !(dq > 0.0) {
                    break;
                }
                let alpha = rz / dq;
                for k in 0..n {
                    p[k] += alpha * d[k];
                }
                for (x, y) in xu.iter_mut().zip(&du) {
                    *x -= alpha * y;
                }
                for (x, y) in xv.iter_mut().zip(&dv) {
                    *x -= alpha * y;
                }
                r = self.residual(xu, xv);
                res = Self::max_abs(&r);
                if res <= tol {
                    break;
                }
                // Round-off floor: restart from a fresh velocity.
                if res < 0.5 * best {
                    (best, since_best) = (res, 0);
                } else {
                    since_best += 1;
                    if since_best > STAGNATION {
                        break;
                    }
                }
                z = precondition(self.ps, &r);
                let rz_new = self.ps.dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for k in 0..n {
                    d[k] = z[k] + beta * d[k];
                }
            }
            // Refresh the velocity from the pressure to shed accumulated drift.
            self.velocity(p, xu, xv)?;
            r = self.residual(xu, xv);
            let fresh = Self::max_abs(&r);
            if fresh >= start {
                stall += 1;
                if stall > 3 {
                    if fresh <= self.ctrl.div_tol {
                        return Ok(it);
                    }
                    return Err(Error::NonConvergence { solver: "pressure conjugate gradients", iterations: it, residual: fresh });
                }
            }
            res = fresh;
            continue 'restart;
        }
        Ok(it)
    }
}
