//! Scenario orchestration: initialization, the time loop of either skeleton
//! model, snapshots at requested times and per-snapshot metrics.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::elastic::{coupled_step, CoupledState, CouplingScheme, ElasticParams};
use crate::error::{Error, Result};
use crate::geometry::{build_mask, CellMask, GeometryKind, SquaresConvention};
use crate::grid::{divergence, Field, Location, StaggeredGrid};
use crate::metrics::{self, RunMetrics, RunSummary, RunVerdicts, SnapshotMetrics};
use crate::saddle::{InnerSolver, IterationControl, PressureScheme, SolveDiagnostics};
use crate::stokes::{stationary_stokes_solve, StokesParams};
use crate::transport::{check_max_principle, choose_dt, extrema, init_density, total_mass, upwind_step, InitialData, TransportState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Mode {
    #[default]
    Rigid,
    Elastic,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Rigid => "rigid",
            Mode::Elastic => "elastic",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    pub n: usize,
    pub m: f64,
    pub cells_per_period: usize,
    /// Rows of the grid; defaults to the column count.
    pub ny: Option<usize>,
    pub convention: SquaresConvention,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { kind: GeometryKind::Capillaries, n: 4, m: 0.5, cells_per_period: 16, ny: None, convention: SquaresConvention::FluidFraction }
    }
}

impl GeometryConfig {
    pub fn grid(&self) -> Result<StaggeredGrid> {
        let nx = self.n * self.cells_per_period;
        StaggeredGrid::new(nx, self.ny.unwrap_or(nx))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicsConfig {
    pub mode: Mode,
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub rho_s: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub lambda0: f64,
    /// Viscosity multiplier of the rigid model (`μ1` in `μ1 ε²`).
    pub mu1: f64,
    /// Viscosity multiplier of the elastic model.
    pub mu0: f64,
    pub eps: f64,
    /// Body-force coefficient; `None` means `ε²/1000`.
    pub gravity: Option<f64>,
    pub interface_height: f64,
    /// Cosine seed amplitude in cell heights.
    pub perturbation: f64,
    /// Seed periods across the box; `None` means one per geometric period.
    pub periods: Option<usize>,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Rigid,
            rho_plus: 998.2,
            rho_minus: 800.0,
            rho_s: 2000.0,
            mu_plus: 1e-2,
            mu_minus: 0.9,
            lambda0: 0.5,
            mu1: 1.0,
            mu0: 1.0,
            eps: 2e-5,
            gravity: None,
            interface_height: 0.5,
            perturbation: 0.5,
            periods: None,
        }
    }
}

impl PhysicsConfig {
    pub fn gravity(&self) -> f64 {
        self.gravity.unwrap_or(self.eps * self.eps / 1000.0)
    }

    pub fn delta(&self) -> f64 {
        self.rho_plus / self.rho_minus
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericsConfig {
    pub cfl: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub control: IterationControl,
    pub coupling: CouplingScheme,
    pub k_couple: usize,
    pub coupling_tol: f64,
    /// Threshold fraction of the mixing band.
    pub theta: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            dt_min: 1e-9,
            dt_max: 50.0,
            control: IterationControl::default(),
            coupling: CouplingScheme::Monolithic,
            k_couple: 5,
            coupling_tol: 1e-5,
            theta: metrics::THETA,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScheduleConfig {
    pub t_end: f64,
    /// Sorted output times; empty means `[t_end]`.
    pub snapshot_times: Vec<f64>,
}

impl ScheduleConfig {
    pub fn targets(&self) -> Vec<f64> {
        if self.snapshot_times.is_empty() {
            vec![self.t_end]
        } else {
            self.snapshot_times.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SnapshotFormat {
    Csv,
    Vtk,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<SnapshotFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".to_string(), formats: vec![SnapshotFormat::Csv] }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScenarioConfig {
    pub geometry: GeometryConfig,
    pub physics: PhysicsConfig,
    pub numerics: NumericsConfig,
    pub schedule: ScheduleConfig,
    pub output: OutputConfig,
}

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("{x} is not positive")))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if g.n == 0 {
            return Err(invalid("geometry.n", "must be at least 1"));
        }
        if g.kind != GeometryKind::AllFluid && !(g.m > 0.0 && g.m < 1.0) {
            return Err(invalid("geometry.m", format!("porosity {} is outside (0, 1)", g.m)));
        }
        let ph = &self.physics;
        for (name, x) in [
            ("physics.rho_plus", ph.rho_plus),
            ("physics.rho_minus", ph.rho_minus),
            ("physics.rho_s", ph.rho_s),
            ("physics.mu_plus", ph.mu_plus),
            ("physics.mu_minus", ph.mu_minus),
            ("physics.lambda0", ph.lambda0),
            ("physics.mu1", ph.mu1),
            ("physics.mu0", ph.mu0),
            ("physics.eps", ph.eps),
        ] {
            positive(name, x)?;
        }
        if let Some(gr) = ph.gravity {
            if !gr.is_finite() {
                return Err(invalid("physics.gravity", "must be finite"));
            }
        }
        if !(ph.interface_height > 0.0 && ph.interface_height < 1.0) {
            return Err(invalid("physics.interface_height", format!("{} is outside (0, 1)", ph.interface_height)));
        }
        if !(ph.perturbation >= 0.0 && ph.perturbation.is_finite()) {
            return Err(invalid("physics.perturbation", "must be non-negative"));
        }
        let nu = &self.numerics;
        if !(nu.cfl > 0.0 && nu.cfl <= 1.0) {
            return Err(invalid("numerics.cfl", format!("{} is outside (0, 1]", nu.cfl)));
        }
        positive("numerics.dt_min", nu.dt_min)?;
        positive("numerics.dt_max", nu.dt_max)?;
        if nu.dt_min > nu.dt_max {
            return Err(invalid("numerics.dt_min", "exceeds dt_max"));
        }
        if !(nu.theta > 0.0 && nu.theta < 0.5) {
            return Err(invalid("numerics.theta", format!("{} is outside (0, 0.5)", nu.theta)));
        }
        positive("numerics.coupling_tol", nu.coupling_tol)?;
        if nu.k_couple == 0 {
            return Err(invalid("numerics.k_couple", "must be at least 1"));
        }
        nu.control.validate()?;
        let s = &self.schedule;
        if !(s.t_end >= 0.0 && s.t_end.is_finite()) {
            return Err(invalid("schedule.t_end", "must be non-negative"));
        }
        if s.snapshot_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("schedule.snapshot_times", "must be strictly increasing"));
        }
        if s.snapshot_times.iter().any(|&t| !(t >= 0.0 && t <= s.t_end)) {
            return Err(invalid("schedule.snapshot_times", "must lie in [0, t_end]"));
        }
        self.geometry.grid()?;
        Ok(())
    }

    pub fn stokes_params(&self) -> StokesParams {
        StokesParams { mu1: self.physics.mu1, eps: self.physics.eps, gravity: self.physics.gravity(), control: self.numerics.control }
    }

    pub fn elastic_params(&self) -> ElasticParams {
        ElasticParams {
            lambda0: self.physics.lambda0,
            mu0: self.physics.mu0,
            rho_s: self.physics.rho_s,
            gravity: self.physics.gravity(),
            control: self.numerics.control,
            scheme: self.numerics.coupling,
            k_couple: self.numerics.k_couple,
            coupling_tol: self.numerics.coupling_tol,
        }
    }

    pub fn initial_data(&self) -> InitialData {
        let ph = &self.physics;
        InitialData {
            rho_plus: ph.rho_plus,
            rho_minus: ph.rho_minus,
            rho_s: (ph.mode == Mode::Elastic).then_some(ph.rho_s),
            mu_plus: ph.mu_plus,
            mu_minus: ph.mu_minus,
            interface_height: ph.interface_height,
            perturbation: ph.perturbation,
            periods: ph.periods.unwrap_or(self.geometry.n),
        }
    }

    /// The same scenario on `n` periods at the same resolution per period.
    pub fn with_periods(&self, n: usize) -> Self {
        let mut c = self.clone();
        c.geometry.n = n;
        if let Some(ny) = c.geometry.ny {
            c.geometry.ny = Some(ny * n / self.geometry.n.max(1));
        }
        c
    }

    /// Short human-readable pressure-solver label.
    pub fn solver_label(&self) -> &'static str {
        match (self.numerics.control.scheme, self.numerics.control.inner) {
            (PressureScheme::Conjugate, InnerSolver::Direct) => "cg/direct",
            (PressureScheme::Conjugate, InnerSolver::Relaxation) => "cg/relaxation",
            (PressureScheme::ArtificialCompressibility, InnerSolver::Direct) => "ac/direct",
            (PressureScheme::ArtificialCompressibility, InnerSolver::Relaxation) => "ac/relaxation",
        }
    }
}

/// Fields of one output time. Velocities are face fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub step: usize,
    pub rho: Field,
    pub p: Field,
    pub u: Field,
    pub v: Field,
    pub mu: Field,
    pub phase: Field,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub grid: StaggeredGrid,
    pub mask: CellMask,
    pub snapshots: Vec<Snapshot>,
    pub metrics: RunMetrics,
    /// Solver failure that ended the run; snapshots and metrics up to it are kept.
    pub failure: Option<Error>,
}

struct Recorder<'a> {
    cfg: &'a ScenarioConfig,
    grid: StaggeredGrid,
    mask: CellMask,
    initial_profile: Vec<Option<f64>>,
    mass0: f64,
    since: SolveDiagnostics,
    total: SolveDiagnostics,
    snapshots: Vec<Snapshot>,
    metrics: Vec<SnapshotMetrics>,
}

impl Recorder<'_> {
    fn absorb(&mut self, d: &SolveDiagnostics, div: f64) {
        self.since.absorb(d);
        self.since.residual = self.since.residual.max(div);
        self.total.absorb(d);
        self.total.residual = self.total.residual.max(div);
    }

    fn record(&mut self, state: &TransportState, step: usize, t: f64, p: &Field, u: &Field, v: &Field) -> Result<()> {
        let cfg = self.cfg;
        let ph = &cfg.physics;
        let rho_phase = metrics::phase_density(&state.phase, ph.rho_plus, ph.rho_minus);
        let width = metrics::mixing_zone_width(&rho_phase, &self.mask, &self.grid, ph.rho_plus, ph.rho_minus, cfg.numerics.theta)?;
        let profile = metrics::interface_heights(&state.phase, &self.mask, &self.grid);
        let displacement = metrics::mean_displacement(&profile, &self.initial_profile);
        let (heavy, light) = metrics::pure_phase_volumes(&state.phase, &self.mask, &self.grid, cfg.numerics.theta);
        let (lo, hi) = extrema(state, &self.grid);
        self.metrics.push(SnapshotMetrics {
            t,
            step,
            mixing_zone_width: width,
            interface_mean_height: metrics::mean_height(&profile),
            interface_displacement: displacement,
            interface_profile: profile,
            heavy_volume: heavy,
            light_volume: light,
            total_mass: total_mass(state, &self.grid),
            rho_min: lo,
            rho_max: hi,
            max_divergence: self.since.residual,
            outer_iterations: self.since.outer_iterations,
            inner_iterations: self.since.inner_iterations,
        });
        self.since = SolveDiagnostics::default();
        self.snapshots.push(Snapshot { t, step, rho: state.rho.clone(), p: p.clone(), u: u.clone(), v: v.clone(), mu: state.mu.clone(), phase: state.phase.clone() });
        Ok(())
    }

    fn finish(self, steps: usize, t: f64, mass: f64, failure: Option<Error>) -> RunOutput {
        let ph = &self.cfg.physics;
        let mass_drift = if self.mass0 == 0.0 { 0.0 } else { (mass - self.mass0).abs() / self.mass0 };
        let verdicts = RunVerdicts {
            completed: failure.is_none() && self.metrics.len() == self.cfg.schedule.targets().len(),
            mass_conserved: mass_drift <= 1e-12 * steps.max(1) as f64,
            divergence_within_tol: self.total.residual <= self.cfg.numerics.control.div_tol,
        };
        let summary = RunSummary {
            mode: ph.mode.name().to_string(),
            delta: ph.delta(),
            steps,
            snapshots: self.metrics.len(),
            t_final: t,
            mass_drift,
            max_divergence: self.total.residual,
            outer_iterations: self.total.outer_iterations,
            inner_iterations: self.total.inner_iterations,
            failure: failure.as_ref().map(|e| e.to_string()),
            verdicts,
        };
        RunOutput { grid: self.grid, mask: self.mask, snapshots: self.snapshots, metrics: RunMetrics { snapshots: self.metrics, summary }, failure }
    }
}

/// Max-principle slack after a step: round-off plus what a residual
/// divergence can create.
fn max_principle_slack(state: &TransportState, dt: f64, div: f64) -> f64 {
    let scale = state.bounds.0.abs().max(state.bounds.1.abs());
    1e-12 * scale + dt * div * scale
}

fn fluid_divergence(u: &Field, v: &Field, grid: &StaggeredGrid, mask: &CellMask) -> Result<f64> {
    let d = divergence(u, v, grid)?;
    let mut m = 0.0f64;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if mask.is_fluid(i, j) {
                m = m.max(d[(i, j)].abs());
            }
        }
    }
    Ok(m)
}

/// Runs one scenario. Invalid configurations are errors; solver failures end
/// the run early and are reported in [`RunOutput::failure`].
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let grid = cfg.geometry.grid()?;
    let mask = build_mask(cfg.geometry.kind, cfg.geometry.n, cfg.geometry.m, cfg.geometry.convention, &grid)?;
    let mut state = init_density(&grid, &mask, &cfg.initial_data())?;
    state.cfl = cfg.numerics.cfl;
    let mass0 = total_mass(&state, &grid);
    let initial_profile = metrics::interface_heights(&state.phase, &mask, &grid);
    let rec = Recorder {
        cfg,
        grid,
        mask,
        initial_profile,
        mass0,
        since: SolveDiagnostics::default(),
        total: SolveDiagnostics::default(),
        snapshots: Vec::new(),
        metrics: Vec::new(),
    };
    Ok(match cfg.physics.mode {
        Mode::Rigid => run_rigid(cfg, rec, state),
        Mode::Elastic => run_elastic(cfg, rec, state),
    })
}

fn run_rigid(cfg: &ScenarioConfig, mut rec: Recorder<'_>, mut state: TransportState) -> RunOutput {
    let grid = rec.grid;
    let params = cfg.stokes_params();
    let targets = cfg.schedule.targets();
    let mut next = 0;
    let mut p = Field::zeros(&grid, Location::Center);
    let mut steps = 0;
    let mut slack = 0.0;
    let result: Result<()> = (|| loop {
        let sol = stationary_stokes_solve(&grid, &state.rho, &state.mu, &rec.mask, &params, &p)?;
        let div = fluid_divergence(&sol.u, &sol.v, &grid, &rec.mask)?;
        rec.absorb(&sol.diagnostics, div);
        p = sol.p.clone();
        if state.t == targets[next] {
            rec.record(&state, steps, state.t, &sol.p, &sol.u, &sol.v)?;
            next += 1;
            if next == targets.len() {
                return Ok(());
            }
        }
        let remaining = targets[next] - state.t;
        let dt = choose_dt(&sol.u, &sol.v, &grid, cfg.numerics.cfl, cfg.numerics.dt_min, cfg.numerics.dt_max);
        let clipped = dt >= remaining;
        state.dt = if clipped { remaining } else { dt };
        let mut advanced = upwind_step(&state, &sol.u, &sol.v, &grid, &rec.mask)?;
        if clipped {
            advanced.t = targets[next];
        }
        slack += max_principle_slack(&state, state.dt, div);
        check_max_principle(&advanced, &grid, slack)?;
        state = advanced;
        steps += 1;
    })();
    let mass = total_mass(&state, &grid);
    rec.finish(steps, state.t, mass, result.err())
}

const CFL_RETRIES: usize = 30;

fn run_elastic(cfg: &ScenarioConfig, mut rec: Recorder<'_>, state: TransportState) -> RunOutput {
    let grid = rec.grid;
    let params = cfg.elastic_params();
    let targets = cfg.schedule.targets();
    let mut next = 0;
    let mut coupled = CoupledState::new(&grid, &rec.mask, state);
    let mut steps = 0;
    let mut slack = 0.0;
    let mut dt_try = cfg.numerics.dt_max;
    let result: Result<()> = (|| loop {
        let t = coupled.transport.t;
        if t == targets[next] {
            let (u, v, p) = (coupled.velocity.u.clone(), coupled.velocity.v.clone(), coupled.p.clone());
            rec.record(&coupled.transport, steps, t, &p, &u, &v)?;
            next += 1;
            if next == targets.len() {
                return Ok(());
            }
        }
        let remaining = targets[next] - t;
        let mut dt = dt_try.min(cfg.numerics.dt_max);
        let mut attempt = 0;
        let (mut advanced, report) = loop {
            let clipped = dt >= remaining;
            let step_dt = if clipped { remaining } else { dt };
            match coupled_step(&coupled, step_dt, &grid, &rec.mask, &params) {
                Ok((mut s, r)) => {
                    if clipped {
                        s.transport.t = targets[next];
                    }
                    dt = step_dt;
                    break (s, r);
                }
                Err(Error::Cfl { required, .. }) if attempt < CFL_RETRIES => {
                    attempt += 1;
                    dt = (0.5 * dt).min(0.9 * required).max(cfg.numerics.dt_min);
                }
                Err(e) => return Err(e),
            }
        };
        if report.fluid_divergence > cfg.numerics.control.div_tol {
            return Err(Error::Divergence { residual: report.fluid_divergence, tol: cfg.numerics.control.div_tol });
        }
        rec.absorb(&report.diagnostics, report.fluid_divergence);
        let rate = crate::transport::advective_rate(&advanced.velocity.u, &advanced.velocity.v, &grid);
        let cfl_dt = if rate > 0.0 { cfg.numerics.cfl / rate } else { f64::INFINITY };
        dt_try = (2.0 * dt).min(0.9 * cfl_dt).max(cfg.numerics.dt_min);
        // The whole box is transported; divergence of V is bounded by the solve.
        let div_all = report.diagnostics.residual.max(report.fluid_divergence);
        slack += max_principle_slack(&coupled.transport, dt, div_all + cfg.numerics.control.div_tol);
        check_max_principle(&advanced.transport, &grid, slack)?;
        advanced.transport.dt = dt;
        coupled = advanced;
        steps += 1;
    })();
    let mass = total_mass(&coupled.transport, &grid);
    rec.finish(steps, coupled.transport.t, mass, result.err())
}

/// Collated results of runs at several period counts.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry {
    pub n: usize,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    /// Orders entries by `n`.
    pub fn collate(mut entries: Vec<SweepEntry>) -> Self {
        entries.sort_by_key(|e| e.n);
        Self { entries }
    }

    /// `(n, t, width)` triples of every successful run.
    pub fn width_curves(&self) -> Vec<(usize, Vec<(f64, f64)>)> {
        self.entries
            .iter()
            .filter_map(|e| e.metrics.as_ref().map(|m| (e.n, m.snapshots.iter().map(|s| (s.t, s.mixing_zone_width)).collect())))
            .collect()
    }
}

/// Runs one sweep member; failures become report entries.
pub fn sweep_member(base: &ScenarioConfig, n: usize) -> SweepEntry {
    match run_scenario(&base.with_periods(n)) {
        Ok(out) => SweepEntry { n, error: out.failure.as_ref().map(|e| e.to_string()), metrics: Some(out.metrics) },
        Err(e) => SweepEntry { n, metrics: None, error: Some(e.to_string()) },
    }
}

/// Sequential ε-sweep.
pub fn epsilon_sweep(base: &ScenarioConfig, n_list: &[usize]) -> SweepReport {
    SweepReport::collate(n_list.iter().map(|&n| sweep_member(base, n)).collect())
}
