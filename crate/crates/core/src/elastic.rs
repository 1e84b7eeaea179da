//! Fluid motion in an elastic skeleton.
//!
//! The solid obeys the incompressible Lamé system `λ0 Δw_s − ∇p + g ρ_s e2 = 0`
//! and the fluid the quasi-static Stokes system for the velocity
//! `V = ∂w_f/∂t`; displacements and normal stresses are continuous across the
//! pore walls.
//!
//! Two time integrators are provided. [`CouplingScheme::Monolithic`] solves
//! one generalized Stokes problem for the velocity over the whole box, with
//! the solid carried implicitly (`w^{n+1} = w^n + dt V`). This is stable for
//! any step. [`CouplingScheme::Partitioned`] performs the Lamé solve, the
//! traction extraction and the fluid solve with a traction wall condition in
//! sequence, iterating them to continuity. It is explicit in the coupling and
//! needs steps of the order of the viscoelastic time `μ0/λ0`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{CellMask, FaceClass};
use crate::grid::{divergence, Field, Location, StaggeredGrid};
use crate::saddle::{face_cells, IterationControl, PressureSpace, Saddle, SolveDiagnostics};
use crate::stokes::gravity_rhs;
use crate::system::{apply_links, assemble, DirichletSolidRules, Dir, TractionRules, WholeDomainRules};
use crate::transport::{upwind_step, TransportState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CouplingScheme {
    #[default]
    Monolithic,
    Partitioned,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElasticParams {
    pub lambda0: f64,
    /// Multiplier of the fluid viscosity field.
    pub mu0: f64,
    pub rho_s: f64,
    pub gravity: f64,
    pub control: IterationControl,
    pub scheme: CouplingScheme,
    /// Coupling sweeps per step (partitioned scheme).
    pub k_couple: usize,
    pub coupling_tol: f64,
}

impl Default for ElasticParams {
    fn default() -> Self {
        Self {
            lambda0: 0.5,
            mu0: 1.0,
            rho_s: 2.0,
            gravity: 1.0,
            control: IterationControl::default(),
            scheme: CouplingScheme::Monolithic,
            k_couple: 5,
            coupling_tol: 1e-5,
        }
    }
}

impl ElasticParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str| Err(Error::InvalidParameter { name, reason: "must be positive".into() });
        if !(self.lambda0 > 0.0) {
            return bad("lambda0");
        }
        if !(self.mu0 > 0.0) {
            return bad("mu0");
        }
        if !(self.rho_s > 0.0) {
            return bad("rho_s");
        }
        if !(self.coupling_tol > 0.0) {
            return bad("coupling_tol");
        }
        if self.k_couple == 0 {
            return bad("k_couple");
        }
        self.control.validate()
    }
}

/// A vector quantity stored on the faces (displacement or velocity).
#[derive(Clone, Debug, PartialEq)]
pub struct Displacement {
    pub u: Field,
    pub v: Field,
}

impl Displacement {
    pub fn zeros(grid: &StaggeredGrid) -> Self {
        Self { u: Field::zeros(grid, Location::UFace), v: Field::zeros(grid, Location::VFace) }
    }

    /// Samples `f` at the faces; ghost slots receive the value at the nearest
    /// point of the boundary (the wall value used by reflection).
    pub fn dirichlet_from_fn(grid: &StaggeredGrid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let clamp = |x: f64| x.clamp(0.0, 1.0);
        let u = Field::from_fn(grid, Location::UFace, |x, y| f(clamp(x), clamp(y))[0]);
        let v = Field::from_fn(grid, Location::VFace, |x, y| f(clamp(x), clamp(y))[1]);
        Self { u, v }
    }

    pub fn component(&self, loc: Location) -> &Field {
        if loc == Location::UFace {
            &self.u
        } else {
            &self.v
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.v.max_abs())
    }
}

/// Traction vector `A` on one interface face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TractionEntry {
    pub loc: Location,
    pub i: usize,
    pub j: usize,
    /// Unit normal pointing from the solid into the fluid.
    pub normal: [f64; 2],
    pub a: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Traction {
    pub entries: Vec<TractionEntry>,
    u_index: Vec<Option<usize>>,
    v_index: Vec<Option<usize>>,
    nx: usize,
}

impl Traction {
    fn empty(grid: &StaggeredGrid) -> Self {
        Self { entries: Vec::new(), u_index: vec![None; (grid.nx + 1) * grid.ny], v_index: vec![None; grid.nx * (grid.ny + 1)], nx: grid.nx }
    }

    /// Zero traction on every interface face.
    pub fn zeros(grid: &StaggeredGrid, mask: &CellMask) -> Self {
        let mut t = Self::empty(grid);
        for (loc, ni, nj) in [(Location::UFace, grid.nx + 1, grid.ny), (Location::VFace, grid.nx, grid.ny + 1)] {
            for j in 0..nj {
                for i in 0..ni {
                    if mask.face_class(loc, i, j) == FaceClass::Interface {
                        let (_, s) = solid_side(mask, loc, i, j);
                        let normal = if loc == Location::UFace { [-(s as f64), 0.0] } else { [0.0, -(s as f64)] };
                        t.push(TractionEntry { loc, i, j, normal, a: [0.0; 2] });
                    }
                }
            }
        }
        t
    }

    /// `A = −c n` everywhere: pure pressure loading.
    pub fn pressure(grid: &StaggeredGrid, mask: &CellMask, c: f64) -> Self {
        let mut t = Self::zeros(grid, mask);
        for e in &mut t.entries {
            e.a = [-c * e.normal[0], -c * e.normal[1]];
        }
        t
    }

    fn push(&mut self, e: TractionEntry) {
        let k = self.entries.len();
        match e.loc {
            Location::UFace => self.u_index[e.j * (self.nx + 1) + e.i] = Some(k),
            _ => self.v_index[e.j * self.nx + e.i] = Some(k),
        }
        self.entries.push(e);
    }

    pub fn get(&self, loc: Location, i: usize, j: usize) -> Option<&TractionEntry> {
        let k = match loc {
            Location::UFace => *self.u_index.get(j * (self.nx + 1) + i)?,
            _ => *self.v_index.get(j * self.nx + i)?,
        };
        k.map(|k| &self.entries[k])
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, e| m.max(e.a[0].abs()).max(e.a[1].abs()))
    }
}

/// Solid cell next to an interface face and the side it lies on (+1: larger index).
fn solid_side(mask: &CellMask, loc: Location, i: usize, j: usize) -> ((usize, usize), isize) {
    match loc {
        Location::UFace => {
            if mask.cell(i as isize, j as isize) == Some(false) {
                ((i, j), 1)
            } else {
                ((i - 1, j), -1)
            }
        }
        _ => {
            if mask.cell(i as isize, j as isize) == Some(false) {
                ((i, j), 1)
            } else {
                ((i, j - 1), -1)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LameSolution {
    pub w: Displacement,
    /// Solid pressure on solid cells, zero mean per solid block.
    pub p: Field,
    pub diagnostics: SolveDiagnostics,
}

/// Lamé solve with the gravity load `g ρ_s e2`.
pub fn solve_lame(grid: &StaggeredGrid, rho_s: &Field, data: &Displacement, mask: &CellMask, params: &ElasticParams) -> Result<LameSolution> {
    rho_s.expect(grid, Location::Center)?;
    let mut fv = Field::zeros(grid, Location::VFace);
    for j in 1..grid.ny {
        for i in 0..grid.nx {
            fv[(i, j)] = params.gravity * 0.5 * (rho_s[(i, j - 1)] + rho_s[(i, j)]);
        }
    }
    solve_lame_forced(grid, (&Field::zeros(grid, Location::UFace), &fv), data, mask, params)
}

/// Lamé solve `−λ0 Δw + ∇p = f`, `div w = 0` on the solid faces, with
/// Dirichlet values taken from `data` on every other face it touches.
pub fn solve_lame_forced(grid: &StaggeredGrid, force: (&Field, &Field), data: &Displacement, mask: &CellMask, params: &ElasticParams) -> Result<LameSolution> {
    params.validate()?;
    force.0.expect(grid, Location::UFace)?;
    force.1.expect(grid, Location::VFace)?;
    data.u.expect(grid, Location::UFace)?;
    data.v.expect(grid, Location::VFace)?;
    let rules = DirichletSolidRules { mask, coef: params.lambda0, data_u: &data.u, data_v: &data.v };
    let su = assemble(grid, Location::UFace, &rules);
    let sv = assemble(grid, Location::VFace, &rules);
    for (sys, loc) in [(&su, Location::UFace), (&sv, Location::VFace)] {
        for (r, &(i, j)) in sys.faces.iter().enumerate() {
            if !sys.rhs_bc[r].is_finite() {
                return Err(Error::MissingDirichlet { loc, i, j });
            }
        }
    }
    let eta = vec![params.lambda0; grid.nx * grid.ny];
    let mut ps = PressureSpace::cells(grid, |i, j| !mask.is_fluid(i, j), &eta);
    ps.connect(grid, &su, &sv);
    let fu: Vec<f64> = su.faces.iter().zip(&su.rhs_bc).map(|(&(i, j), b)| force.0[(i, j)] + b).collect();
    let fv: Vec<f64> = sv.faces.iter().zip(&sv.rhs_bc).map(|(&(i, j), b)| force.1[(i, j)] + b).collect();
    let mut saddle = Saddle::new(grid, &su, &sv, &ps, params.control, fu, fv, Some((&data.u, &data.v)))?;
    // Net boundary flux of each block is fixed by the data; it must vanish.
    let mut mean = saddle.div_base.clone();
    ps.project(&mut mean);
    let target: Vec<f64> = saddle.div_base.iter().zip(&mean).map(|(b, m)| b - m).collect();
    for (k, t) in target.iter().enumerate() {
        if t.abs() > params.control.div_tol {
            return Err(Error::IncompatibleData { block: ps.component[k], flux: t * ps.area[k] });
        }
    }
    saddle.target = target;
    let sol = saddle.run(vec![0.0; ps.len()], None)?;
    let mut w = data.clone();
    su.scatter(&sol.xu, &mut w.u);
    sv.scatter(&sol.xv, &mut w.v);
    Ok(LameSolution { w, p: ps.scatter(grid, &sol.p), diagnostics: sol.diagnostics })
}

/// Derivative at the wall of samples taken at distances `h/2, 3h/2, 5h/2`
/// (or fewer) inward along `s`.
fn staggered_one_sided(f: &[f64], h: f64) -> f64 {
    match f.len() {
        3 => (-2.0 * f[0] + 3.0 * f[1] - f[2]) / h,
        2 => (f[1] - f[0]) / h,
        _ => 0.0,
    }
}

/// Derivative at the wall of samples at distances `0, h, 2h` (or fewer).
fn collocated_one_sided(f: &[f64], h: f64) -> f64 {
    match f.len() {
        3 => (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h),
        2 => (f[1] - f[0]) / h,
        _ => 0.0,
    }
}

/// Interface traction `A = λ0 D(w) n − p n` from solid-side values, with
/// `n` pointing from the solid into the fluid and `p` taken in the adjacent
/// solid cell.
pub fn interface_traction(grid: &StaggeredGrid, w: &Displacement, p_s: &Field, mask: &CellMask, params: &ElasticParams) -> Traction {
    let mut out = Traction::zeros(grid, mask);
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    for e in &mut out.entries {
        let (i, j) = (e.i as isize, e.j as isize);
        let ((si, sj), s) = solid_side(mask, e.loc, e.i, e.j);
        let p = p_s[(si, sj)];
        // (normal derivative of the normal component, cross derivative sum)
        let (dnn, shear) = match e.loc {
            Location::UFace => {
                let u = &w.u;
                let normal: Vec<f64> = (0..3).map(|k| i + s * k).take_while(|&a| a >= 0 && a <= nx).map(|a| u.get(a, j)).collect();
                let d11 = s as f64 * collocated_one_sided(&normal, grid.h1);
                let d2u = if j > 0 && j < ny - 1 {
                    (u.get(i, j + 1) - u.get(i, j - 1)) / (2.0 * grid.h2)
                } else if j < ny - 1 {
                    (u.get(i, j + 1) - u.get(i, j)) / grid.h2
                } else if j > 0 {
                    (u.get(i, j) - u.get(i, j - 1)) / grid.h2
                } else {
                    0.0
                };
                // v averaged to the face height in the columns on the solid side.
                let cols: Vec<f64> = (0..3)
                    .map(|k| if s > 0 { i + k } else { i - 1 - k })
                    .take_while(|&c| c >= 0 && c < nx)
                    .map(|c| 0.5 * (w.v.get(c, j) + w.v.get(c, j + 1)))
                    .collect();
                let d1v = s as f64 * staggered_one_sided(&cols, grid.h1);
                (d11, 0.5 * (d2u + d1v))
            }
            _ => {
                let v = &w.v;
                let normal: Vec<f64> = (0..3).map(|k| j + s * k).take_while(|&b| b >= 0 && b <= ny).map(|b| v.get(i, b)).collect();
                let d22 = s as f64 * collocated_one_sided(&normal, grid.h2);
                let d1v = if i > 0 && i < nx - 1 {
                    (v.get(i + 1, j) - v.get(i - 1, j)) / (2.0 * grid.h1)
                } else if i < nx - 1 {
                    (v.get(i + 1, j) - v.get(i, j)) / grid.h1
                } else if i > 0 {
                    (v.get(i, j) - v.get(i - 1, j)) / grid.h1
                } else {
                    0.0
                };
                let rows: Vec<f64> = (0..3)
                    .map(|k| if s > 0 { j + k } else { j - 1 - k })
                    .take_while(|&r| r >= 0 && r < ny)
                    .map(|r| 0.5 * (w.u.get(i, r) + w.u.get(i + 1, r)))
                    .collect();
                let d2u = s as f64 * staggered_one_sided(&rows, grid.h2);
                (d22, 0.5 * (d2u + d1v))
            }
        };
        let n = e.normal;
        // D n for an axis-aligned normal.
        let dn = if e.loc == Location::UFace { [dnn * n[0], shear * n[0]] } else { [shear * n[1], dnn * n[1]] };
        e.a = [params.lambda0 * dn[0] - p * n[0], params.lambda0 * dn[1] - p * n[1]];
    }
    out
}

/// Result of the fluid solve with traction walls.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidSolution {
    /// Fluid velocity on fluid and interface faces.
    pub velocity: Displacement,
    /// Fluid pressure on fluid cells; solid cells carry their block shift.
    pub p: Field,
    /// Pressure shift added to the solid pressure of each block.
    pub block_shift: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
    /// Lagged-shear fixed-point sweeps performed.
    pub shear_sweeps: usize,
}

const SHEAR_SWEEPS: usize = 50;

/// Stokes solve in the pores, `−∇·(μ0 μ ∇V) + ∇p = g ρ e2`, with no-slip on
/// the box and the traction `A` imposed on the pore walls.
#[allow(clippy::too_many_arguments)]
pub fn solve_fluid_with_traction(
    grid: &StaggeredGrid,
    rho: &Field,
    visc: &Field,
    traction: &Traction,
    mask: &CellMask,
    params: &ElasticParams,
    p_init: Option<&Field>,
    v_init: Option<&Displacement>,
) -> Result<FluidSolution> {
    params.validate()?;
    rho.expect(grid, Location::Center)?;
    visc.expect(grid, Location::Center)?;
    let eta: Vec<f64> = visc.interior().iter().map(|m| params.mu0 * m).collect();
    let rules = TractionRules { mask, eta: &eta };
    let su = assemble(grid, Location::UFace, &rules);
    let sv = assemble(grid, Location::VFace, &rules);
    let (mut ps, first_block) = PressureSpace::fluid_and_blocks(grid, mask, &eta);
    ps.connect(grid, &su, &sv);
    // Body force uses the fluid-side density on interface faces.
    let fluid_rho = Field::from_interior(
        grid,
        Location::Center,
        &(0..grid.nx * grid.ny)
            .map(|c| {
                let (i, j) = (c % grid.nx, c / grid.nx);
                if mask.is_fluid(i, j) {
                    rho[(i, j)]
                } else {
                    neighbour_fluid_mean(rho, mask, i, j)
                }
            })
            .collect::<Vec<_>>(),
    )?;
    let mut base_u = vec![0.0; su.len()];
    let mut base_v = gravity_rhs(grid, &sv, &fluid_rho, params.gravity);
    for (sys, base, comp) in [(&su, &mut base_u, 0usize), (&sv, &mut base_v, 1usize)] {
        let h = if comp == 0 { grid.h1 } else { grid.h2 };
        for (r, &(i, j)) in sys.faces.iter().enumerate() {
            if let Some(e) = traction.get(sys.loc, i, j) {
                base[r] -= e.a[comp] / h;
            }
        }
    }
    let mut p = match p_init {
        Some(f) => ps.gather(f),
        None => vec![0.0; ps.len()],
    };
    let mut current = v_init.cloned().unwrap_or_else(|| Displacement::zeros(grid));
    let mut diagnostics = SolveDiagnostics::default();
    let mut sweeps = 0;
    let mut last = None;
    loop {
        sweeps += 1;
        let mut fu = base_u.clone();
        let mut fv = base_v.clone();
        add_shear_terms(grid, &su, traction, &current, &mut fu);
        add_shear_terms(grid, &sv, traction, &current, &mut fv);
        let mut saddle = Saddle::new(grid, &su, &sv, &ps, params.control, fu, fv, None)?;
        let sol = saddle.run(p, None)?;
        diagnostics.absorb(&sol.diagnostics);
        diagnostics.residual = sol.diagnostics.residual;
        let mut next = Displacement::zeros(grid);
        su.scatter(&sol.xu, &mut next.u);
        sv.scatter(&sol.xv, &mut next.v);
        p = sol.p;
        let lagged = !su.neumann.is_empty() || !sv.neumann.is_empty();
        let change = diff_max(&next, &current);
        let scale = next.max_abs().max(f64::MIN_POSITIVE);
        current = next;
        if !lagged || change <= params.control.relax_tol * scale || sweeps >= SHEAR_SWEEPS {
            break;
        }
        // Stop if the fixed point no longer contracts.
        if let Some(prev) = last {
            if change >= prev && sweeps > 5 {
                break;
            }
        }
        last = Some(change);
    }
    if diagnostics.residual > params.control.div_tol {
        return Err(Error::Divergence { residual: diagnostics.residual, tol: params.control.div_tol });
    }
    let pf = ps.scatter(grid, &p);
    let block_shift = p[first_block..].to_vec();
    Ok(FluidSolution { velocity: current, p: pf, block_shift, diagnostics, shear_sweeps: sweeps })
}

fn neighbour_fluid_mean(rho: &Field, mask: &CellMask, i: usize, j: usize) -> f64 {
    let (mut s, mut n) = (0.0, 0);
    for (a, b) in [(i as isize - 1, j as isize), (i as isize + 1, j as isize), (i as isize, j as isize - 1), (i as isize, j as isize + 1)] {
        if mask.cell(a, b) == Some(true) {
            s += rho[(a as usize, b as usize)];
            n += 1;
        }
    }
    if n == 0 {
        rho[(i, j)]
    } else {
        s / n as f64
    }
}

fn diff_max(a: &Displacement, b: &Displacement) -> f64 {
    let mut m = 0.0f64;
    for (x, y) in [(&a.u, &b.u), (&a.v, &b.v)] {
        let (ni, nj) = x.dims();
        for j in 0..nj {
            for i in 0..ni {
                m = m.max((x[(i, j)] - y[(i, j)]).abs());
            }
        }
    }
    m
}

/// Right-hand side of the tangential traction links: the ghost across a
/// pore wall satisfies `(μ/2)(∂_t V_n + ∂_n V_t) = n·e_n A_t`, with the
/// along-wall derivative of the normal velocity lagged.
fn add_shear_terms(grid: &StaggeredGrid, sys: &crate::system::FaceSystem, traction: &Traction, current: &Displacement, f: &mut [f64]) {
    for &(row, dir, c) in &sys.neumann {
        let (i, j) = sys.faces[row];
        let (i, j) = (i as isize, j as isize);
        let d = match dir {
            Dir::E | Dir::S => 1.0,
            Dir::W | Dir::N => -1.0,
        };
        // Wall faces meeting at the node of this link and the along-wall spacing.
        let (wall_loc, faces, h_link, h_along, comp) = match sys.loc {
            Location::UFace => {
                let b = if dir == Dir::S { j + 1 } else { j };
                (Location::VFace, [(i - 1, b), (i, b)], grid.h2, grid.h1, 0usize)
            }
            _ => {
                let a = if dir == Dir::E { i + 1 } else { i };
                (Location::UFace, [(a, j - 1), (a, j)], grid.h1, grid.h2, 1usize)
            }
        };
        let field = current.component(wall_loc);
        let (ni, nj) = field.dims();
        let inside = |(a, b): (isize, isize)| a >= 0 && b >= 0 && (a as usize) < ni && (b as usize) < nj;
        let mut a_sum = 0.0;
        let mut count = 0;
        for &q in &faces {
            if inside(q) {
                if let Some(e) = traction.get(wall_loc, q.0 as usize, q.1 as usize) {
                    a_sum += e.a[comp];
                    count += 1;
                }
            }
        }
        let a_t = if count > 0 { a_sum / count as f64 } else { 0.0 };
        let along = if inside(faces[0]) && inside(faces[1]) { (field.get(faces[1].0, faces[1].1) - field.get(faces[0].0, faces[0].1)) / h_along } else { 0.0 };
        let mu = c * h_link * h_link;
        f[row] -= 2.0 * a_t / h_link + d * mu * along / h_link;
    }
}

/// Everything carried from one elastic step to the next.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    /// Fluid displacement on fluid and interface faces.
    pub w_f: Displacement,
    /// Solid displacement on solid and interface faces.
    pub w_s: Displacement,
    /// Velocity of the last step (fluid and solid).
    pub velocity: Displacement,
    /// Unified pressure, zero mean over all cells.
    pub p: Field,
    /// Mixture density, viscosity and phase marker over the whole box.
    pub transport: TransportState,
    pub traction: Traction,
}

impl CoupledState {
    pub fn new(grid: &StaggeredGrid, mask: &CellMask, transport: TransportState) -> Self {
        Self {
            w_f: Displacement::zeros(grid),
            w_s: Displacement::zeros(grid),
            velocity: Displacement::zeros(grid),
            p: Field::zeros(grid, Location::Center),
            transport,
            traction: Traction::zeros(grid, mask),
        }
    }

    /// Displacement with the fluid values in the pores and the solid values in
    /// the skeleton.
    pub fn combined(&self, mask: &CellMask) -> Displacement {
        let mut w = self.w_f.clone();
        for (dst, src, loc) in [(&mut w.u, &self.w_s.u, Location::UFace), (&mut w.v, &self.w_s.v, Location::VFace)] {
            let (ni, nj) = dst.dims();
            for j in 0..nj {
                for i in 0..ni {
                    if mask.face_class(loc, i, j) == FaceClass::Solid {
                        dst[(i, j)] = src[(i, j)];
                    }
                }
            }
        }
        w
    }
}

/// What one coupled step reports.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct StepReport {
    pub diagnostics: SolveDiagnostics,
    /// max |div V| over fluid cells.
    pub fluid_divergence: f64,
    /// max |div w_s| over solid cells.
    pub solid_divergence: f64,
    /// max |w_f − w_s| over interface faces.
    pub continuity: f64,
    pub coupling_sweeps: usize,
    pub residual_history: Vec<f64>,
}

fn cell_max(f: &Field, mask: &CellMask, fluid: bool) -> f64 {
    let mut m = 0.0f64;
    for j in 0..mask.ny {
        for i in 0..mask.nx {
            if mask.is_fluid(i, j) == fluid {
                m = m.max(f[(i, j)].abs());
            }
        }
    }
    m
}

fn split(w: &Displacement, mask: &CellMask) -> (Displacement, Displacement) {
    let mut wf = w.clone();
    let mut ws = w.clone();
    for (f, s, loc) in [(&mut wf.u, &mut ws.u, Location::UFace), (&mut wf.v, &mut ws.v, Location::VFace)] {
        let (ni, nj) = f.dims();
        for j in 0..nj {
            for i in 0..ni {
                match mask.face_class(loc, i, j) {
                    FaceClass::Solid => f[(i, j)] = 0.0,
                    FaceClass::Fluid => s[(i, j)] = 0.0,
                    _ => {}
                }
            }
        }
    }
    (wf, ws)
}

fn interface_gap(a: &Displacement, b: &Displacement, mask: &CellMask) -> f64 {
    let mut m = 0.0f64;
    for (x, y, loc) in [(&a.u, &b.u, Location::UFace), (&a.v, &b.v, Location::VFace)] {
        let (ni, nj) = x.dims();
        for j in 0..nj {
            for i in 0..ni {
                if mask.face_class(loc, i, j) == FaceClass::Interface {
                    m = m.max((x[(i, j)] - y[(i, j)]).abs());
                }
            }
        }
    }
    m
}

/// Advances the coupled system by `dt`.
pub fn coupled_step(state: &CoupledState, dt: f64, grid: &StaggeredGrid, mask: &CellMask, params: &ElasticParams) -> Result<(CoupledState, StepReport)> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter { name: "dt", reason: "must be positive".into() });
    }
    match params.scheme {
        CouplingScheme::Monolithic => monolithic_step(state, dt, grid, mask, params),
        CouplingScheme::Partitioned => partitioned_step(state, dt, grid, mask, params),
    }
}

fn monolithic_step(state: &CoupledState, dt: f64, grid: &StaggeredGrid, mask: &CellMask, params: &ElasticParams) -> Result<(CoupledState, StepReport)> {
    let n = grid.nx * grid.ny;
    let mut eta = vec![0.0; n];
    let mut elastic = vec![0.0; n];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = grid.cell_index(i, j);
            if mask.is_fluid(i, j) {
                eta[c] = params.mu0 * state.transport.mu[(i, j)];
            } else {
                eta[c] = params.lambda0 * dt;
                elastic[c] = params.lambda0;
            }
        }
    }
    let w = state.combined(mask);
    let rules = WholeDomainRules { mask, eta: &eta };
    let su = assemble(grid, Location::UFace, &rules);
    let sv = assemble(grid, Location::VFace, &rules);
    let mut ps = PressureSpace::cells(grid, |_, _| true, &eta);
    ps.connect(grid, &su, &sv);
    let e_rules = WholeDomainRules { mask, eta: &elastic };
    let lu = apply_links(grid, Location::UFace, &e_rules, &w.u);
    let lv = apply_links(grid, Location::VFace, &e_rules, &w.v);
    let fu: Vec<f64> = su.faces.iter().map(|&(i, j)| lu[(i, j)]).collect();
    let gv = gravity_rhs(grid, &sv, &state.transport.rho, params.gravity);
    let fv: Vec<f64> = sv.faces.iter().zip(gv).map(|(&(i, j), g)| lv[(i, j)] + g).collect();
    // Aim at div w^{n+1} = 0 so the displacement divergence does not drift.
    let div_w = divergence(&w.u, &w.v, grid)?;
    let mut control = params.control;
    control.div_tol = params.control.div_tol / (4.0 * dt.max(1.0));
    let mut saddle = Saddle::new(grid, &su, &sv, &ps, control, fu, fv, None)?;
    saddle.target = (0..n).map(|c| -div_w[(c % grid.nx, c / grid.nx)] / dt).collect();
    let p0 = ps.gather(&state.p);
    let sol = saddle.run(p0, None)?;
    let mut vel = Displacement::zeros(grid);
    su.scatter(&sol.xu, &mut vel.u);
    sv.scatter(&sol.xv, &mut vel.v);
    let mut w_new = w.clone();
    w_new.u.axpy(dt, &vel.u);
    w_new.v.axpy(dt, &vel.v);
    let p = ps.scatter(grid, &sol.p);
    let mut transport = state.transport.clone();
    transport.dt = dt;
    let transport = upwind_step(&transport, &vel.u, &vel.v, grid, mask)?;
    let (w_f, w_s) = split(&w_new, mask);
    let traction = interface_traction(grid, &w_new, &p, mask, params);
    let div_v = divergence(&vel.u, &vel.v, grid)?;
    let div_ws = divergence(&w_new.u, &w_new.v, grid)?;
    let report = StepReport {
        diagnostics: sol.diagnostics,
        fluid_divergence: cell_max(&div_v, mask, true),
        solid_divergence: cell_max(&div_ws, mask, false),
        continuity: interface_gap(&w_f, &w_s, mask),
        coupling_sweeps: 1,
        residual_history: Vec::new(),
    };
    Ok((CoupledState { w_f, w_s, velocity: vel, p, transport, traction }, report))
}

/// Shifts the interface normal data of every solid block so that its net
/// flux vanishes.
fn balance_block_flux(grid: &StaggeredGrid, data: &mut Displacement, mask: &CellMask) {
    let (labels, nblocks) = mask.solid_blocks();
    // (block, outward sign, location, i, j, face length)
    let mut faces = Vec::new();
    for (loc, len) in [(Location::UFace, grid.h2), (Location::VFace, grid.h1)] {
        let (ni, nj) = grid.dims(loc);
        for j in 0..nj {
            for i in 0..ni {
                if mask.face_class(loc, i, j) != FaceClass::Interface {
                    continue;
                }
                let (lo, hi) = face_cells(grid, loc, i, j);
                match (lo.and_then(|c| labels[c]), hi.and_then(|c| labels[c])) {
                    (Some(b), _) => faces.push((b, 1.0, loc, i, j, len)),
                    (_, Some(b)) => faces.push((b, -1.0, loc, i, j, len)),
                    _ => {}
                }
            }
        }
    }
    let mut flux = vec![0.0; nblocks];
    let mut count = vec![0usize; nblocks];
    for &(b, sign, loc, i, j, len) in &faces {
        flux[b] += sign * data.component(loc)[(i, j)] * len;
        count[b] += 1;
    }
    for &(b, sign, loc, i, j, len) in &faces {
        let f = if loc == Location::UFace { &mut data.u } else { &mut data.v };
        f[(i, j)] -= sign * flux[b] / (count[b] as f64 * len);
    }
}

fn partitioned_step(state: &CoupledState, dt: f64, grid: &StaggeredGrid, mask: &CellMask, params: &ElasticParams) -> Result<(CoupledState, StepReport)> {
    let rho_s = Field::constant(grid, Location::Center, params.rho_s);
    let mut history = Vec::new();
    let mut diagnostics = SolveDiagnostics::default();
    // Dirichlet data for the skeleton: the current guess of w_f^{n+1}.
    let mut data = state.w_f.clone();
    data.u.axpy(dt, &state.velocity.u);
    data.v.axpy(dt, &state.velocity.v);
    for f in [&mut data.u, &mut data.v] {
        let (ni, nj) = f.dims();
        for j in -1..=nj as isize {
            for i in -1..=ni as isize {
                if !f.in_interior(i, j) {
                    f.set(i, j, 0.0);
                }
            }
        }
    }
    let mut p_init = state.p.clone();
    let mut v_init = state.velocity.clone();
    let mut omega = 0.5;
    let mut prev_r: Option<Displacement> = None;
    for sweep in 1..=params.k_couple {
        balance_block_flux(grid, &mut data, mask);
        let lame = solve_lame(grid, &rho_s, &data, mask, params)?;
        diagnostics.absorb(&lame.diagnostics);
        let traction = interface_traction(grid, &lame.w, &lame.p, mask, params);
        let fluid = solve_fluid_with_traction(grid, &state.transport.rho, &state.transport.mu, &traction, mask, params, Some(&p_init), Some(&v_init))?;
        diagnostics.absorb(&fluid.diagnostics);
        let mut w_f = state.w_f.clone();
        w_f.u.axpy(dt, &fluid.velocity.u);
        w_f.v.axpy(dt, &fluid.velocity.v);
        let (w_f, _) = split(&w_f, mask);
        let gap = interface_gap(&w_f, &data, mask);
        history.push(gap);
        if gap <= params.coupling_tol {
            return finish_partitioned(state, dt, grid, mask, params, w_f, lame, fluid, traction, diagnostics, history, sweep);
        }
        // Aitken-relaxed update of the Dirichlet data.
        let mut r = w_f.clone();
        r.u.axpy(-1.0, &data.u);
        r.v.axpy(-1.0, &data.v);
        if let Some(prev) = &prev_r {
            let mut dr = r.clone();
            dr.u.axpy(-1.0, &prev.u);
            dr.v.axpy(-1.0, &prev.v);
            let num = dot(prev, &dr);
            let den = dot(&dr, &dr);
            if den > 0.0 {
                omega = (-omega * num / den).clamp(0.05, 1.0);
            }
        }
        data.u.axpy(omega, &r.u);
        data.v.axpy(omega, &r.v);
        prev_r = Some(r);
        p_init = fluid.p;
        v_init = fluid.velocity;
    }
    Err(Error::Coupling { history })
}

fn dot(a: &Displacement, b: &Displacement) -> f64 {
    let mut s = 0.0;
    for (x, y) in [(&a.u, &b.u), (&a.v, &b.v)] {
        let (ni, nj) = x.dims();
        for j in 0..nj {
            for i in 0..ni {
                s += x[(i, j)] * y[(i, j)];
            }
        }
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn finish_partitioned(
    state: &CoupledState,
    dt: f64,
    grid: &StaggeredGrid,
    mask: &CellMask,
    params: &ElasticParams,
    w_f: Displacement,
    lame: LameSolution,
    fluid: FluidSolution,
    traction: Traction,
    diagnostics: SolveDiagnostics,
    history: Vec<f64>,
    sweeps: usize,
) -> Result<(CoupledState, StepReport)> {
    let (_, w_s) = split(&lame.w, mask);
    // Transport velocity: fluid velocity in the pores, solid increment in the skeleton.
    let mut vel = fluid.velocity.clone();
    for (dst, new, old, loc) in [(&mut vel.u, &w_s.u, &state.w_s.u, Location::UFace), (&mut vel.v, &w_s.v, &state.w_s.v, Location::VFace)] {
        let (ni, nj) = dst.dims();
        for j in 0..nj {
            for i in 0..ni {
                if mask.face_class(loc, i, j) == FaceClass::Solid {
                    dst[(i, j)] = (new[(i, j)] - old[(i, j)]) / dt;
                }
            }
        }
    }
    let (labels, _) = mask.solid_blocks();
    let mut p = fluid.p.clone();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if let Some(b) = labels[grid.cell_index(i, j)] {
                p[(i, j)] = lame.p[(i, j)] + fluid.block_shift[b];
            }
        }
    }
    let mean = p.interior().iter().sum::<f64>() / (grid.nx * grid.ny) as f64;
    let p = p.map(|x| x - mean);
    let mut transport = state.transport.clone();
    transport.dt = dt;
    let transport = upwind_step(&transport, &vel.u, &vel.v, grid, mask)?;
    let div_v = divergence(&fluid.velocity.u, &fluid.velocity.v, grid)?;
    let div_ws = divergence(&w_s.u, &w_s.v, grid)?;
    let _ = params;
    let report = StepReport {
        diagnostics,
        fluid_divergence: cell_max(&div_v, mask, true),
        solid_divergence: cell_max(&div_ws, mask, false),
        continuity: interface_gap(&w_f, &w_s, mask),
        coupling_sweeps: sweeps,
        residual_history: history,
    };
    Ok((CoupledState { w_f, w_s, velocity: vel, p, transport, traction }, report))
}
