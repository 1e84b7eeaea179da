//! Scenario files: a TOML document with the sections `[geometry]`,
//! `[physics]`, `[numerics]`, `[schedule]` and `[output]`.
//!
//! Only `geometry.kind`, `physics.rho_plus` and `physics.rho_minus` are
//! required. Every default that gets filled in is listed in
//! [`ParsedConfig::provenance`].

use std::fmt::Write as _;

use muskat_core::elastic::CouplingScheme;
use muskat_core::harness::{Mode, ScenarioConfig, SnapshotFormat};
use muskat_core::{GeometryKind, InnerSolver, PressureScheme, SquaresConvention};
use serde::Deserialize;
use toml::Spanned;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: missing required key `{key}`")]
    Missing { key: &'static str, line: usize },
    #[error("line {line}: `{key}`: {message}")]
    Range { key: String, line: usize, message: String },
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawFile {
    geometry: Option<Spanned<RawGeometry>>,
    physics: Option<Spanned<RawPhysics>>,
    #[serde(default)]
    numerics: RawNumerics,
    #[serde(default)]
    schedule: RawSchedule,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    kind: Option<Spanned<String>>,
    n: Option<Spanned<i64>>,
    m: Option<Spanned<f64>>,
    cells_per_period: Option<Spanned<i64>>,
    ny: Option<Spanned<i64>>,
    convention: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    mode: Option<Spanned<String>>,
    rho_plus: Option<Spanned<f64>>,
    rho_minus: Option<Spanned<f64>>,
    rho_s: Option<Spanned<f64>>,
    mu_plus: Option<Spanned<f64>>,
    mu_minus: Option<Spanned<f64>>,
    lambda0: Option<Spanned<f64>>,
    mu1: Option<Spanned<f64>>,
    mu0: Option<Spanned<f64>>,
    eps: Option<Spanned<f64>>,
    gravity: Option<Spanned<f64>>,
    interface_height: Option<Spanned<f64>>,
    perturbation: Option<Spanned<f64>>,
    periods: Option<Spanned<i64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    cfl: Option<Spanned<f64>>,
    dt_min: Option<Spanned<f64>>,
    dt_max: Option<Spanned<f64>>,
    div_tol: Option<Spanned<f64>>,
    solve_tol: Option<Spanned<f64>>,
    relax_tol: Option<Spanned<f64>>,
    max_iters: Option<Spanned<i64>>,
    c_p: Option<Spanned<f64>>,
    c_p_growth: Option<Spanned<f64>>,
    c_p_max: Option<Spanned<f64>>,
    pressure_scheme: Option<Spanned<String>>,
    inner_solver: Option<Spanned<String>>,
    coupling: Option<Spanned<String>>,
    k_couple: Option<Spanned<i64>>,
    coupling_tol: Option<Spanned<f64>>,
    theta: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    t_end: Option<Spanned<f64>>,
    snapshot_times: Option<Spanned<Vec<f64>>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<Spanned<String>>,
    formats: Option<Spanned<Vec<String>>>,
}

/// A validated configuration and the defaults it received.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: ScenarioConfig,
    /// `key = value` lines for every key that was not in the file.
    pub provenance: Vec<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

struct Ctx<'a> {
    text: &'a str,
    provenance: Vec<String>,
}

impl Ctx<'_> {
    fn line<T>(&self, s: &Spanned<T>) -> usize {
        line_of(self.text, s.span().start)
    }

    fn range<T>(&self, key: &str, s: &Spanned<T>, message: impl Into<String>) -> ConfigError {
        ConfigError::Range { key: key.to_string(), line: self.line(s), message: message.into() }
    }

    fn take<T: Clone + std::fmt::Debug>(&mut self, key: &str, v: &Option<Spanned<T>>, default: T) -> T {
        match v {
            Some(s) => s.get_ref().clone(),
            None => {
                self.provenance.push(format!("{key} = {default:?}"));
                default
            }
        }
    }

    fn count(&mut self, key: &str, v: &Option<Spanned<i64>>, default: usize) -> Result<usize, ConfigError> {
        match v {
            Some(s) if *s.get_ref() < 1 => Err(self.range(key, s, format!("{} must be at least 1", s.get_ref()))),
            Some(s) => Ok(*s.get_ref() as usize),
            None => {
                self.provenance.push(format!("{key} = {default}"));
                Ok(default)
            }
        }
    }

    fn choice<T: Copy>(&mut self, key: &str, v: &Option<Spanned<String>>, options: &[(&str, T)], default: &str) -> Result<T, ConfigError> {
        let name = match v {
            Some(s) => s.get_ref().as_str(),
            None => {
                self.provenance.push(format!("{key} = {default:?}"));
                default
            }
        };
        match options.iter().find(|(n, _)| *n == name) {
            Some((_, t)) => Ok(*t),
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                let s = v.as_ref().expect("defaults are valid");
                Err(self.range(key, s, format!("unknown value {name:?}, expected one of {}", names.join(", "))))
            }
        }
    }
}

const KINDS: [(&str, GeometryKind); 3] =
    [("capillaries", GeometryKind::Capillaries), ("disjoint_squares", GeometryKind::DisjointSquares), ("all_fluid", GeometryKind::AllFluid)];
const CONVENTIONS: [(&str, SquaresConvention); 2] = [("fluid_fraction", SquaresConvention::FluidFraction), ("solid_fraction", SquaresConvention::SolidFraction)];
const MODES: [(&str, Mode); 2] = [("rigid", Mode::Rigid), ("elastic", Mode::Elastic)];
const SCHEMES: [(&str, PressureScheme); 2] =
    [("conjugate", PressureScheme::Conjugate), ("artificial_compressibility", PressureScheme::ArtificialCompressibility)];
const INNER: [(&str, InnerSolver); 2] = [("direct", InnerSolver::Direct), ("relaxation", InnerSolver::Relaxation)];
const COUPLING: [(&str, CouplingScheme); 2] = [("monolithic", CouplingScheme::Monolithic), ("partitioned", CouplingScheme::Partitioned)];
const FORMATS: [(&str, SnapshotFormat); 2] = [("csv", SnapshotFormat::Csv), ("vtk", SnapshotFormat::Vtk)];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], value: T) -> &'static str {
    options.iter().find(|(_, t)| *t == value).map(|(n, _)| *n).expect("every variant is listed")
}

/// Parses and validates a scenario file.
pub fn parse_config(text: &str) -> Result<ParsedConfig, ConfigError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let mut cx = Ctx { text, provenance: Vec::new() };
    let defaults = ScenarioConfig::default();
    let mut cfg = defaults.clone();
    let end = line_of(text, text.len());

    let Some(geometry) = &raw.geometry else {
        return Err(ConfigError::Missing { key: "geometry.kind", line: end });
    };
    let g = geometry.get_ref();
    let Some(kind) = &g.kind else {
        return Err(ConfigError::Missing { key: "geometry.kind", line: cx.line(geometry) });
    };
    cfg.geometry.kind = cx.choice("geometry.kind", &Some(kind.clone()), &KINDS, "capillaries")?;
    cfg.geometry.n = cx.count("geometry.n", &g.n, defaults.geometry.n)?;
    cfg.geometry.m = cx.take("geometry.m", &g.m, defaults.geometry.m);
    if let Some(m) = &g.m {
        if cfg.geometry.kind != GeometryKind::AllFluid && !(*m.get_ref() > 0.0 && *m.get_ref() < 1.0) {
            return Err(cx.range("geometry.m", m, format!("porosity {} is outside (0, 1)", m.get_ref())));
        }
    }
    cfg.geometry.cells_per_period = cx.count("geometry.cells_per_period", &g.cells_per_period, defaults.geometry.cells_per_period)?;
    cfg.geometry.ny = match &g.ny {
        Some(s) if *s.get_ref() < 1 => return Err(cx.range("geometry.ny", s, "must be at least 1")),
        Some(s) => Some(*s.get_ref() as usize),
        None => None,
    };
    cfg.geometry.convention = cx.choice("geometry.convention", &g.convention, &CONVENTIONS, "fluid_fraction")?;

    let Some(physics) = &raw.physics else {
        return Err(ConfigError::Missing { key: "physics.rho_plus", line: end });
    };
    let p = physics.get_ref();
    let ph = &mut cfg.physics;
    ph.mode = cx.choice("physics.mode", &p.mode, &MODES, "rigid")?;
    let required = |key: &'static str, v: &Option<Spanned<f64>>, cx: &Ctx| v.as_ref().map(|s| *s.get_ref()).ok_or(ConfigError::Missing { key, line: cx.line(physics) });
    ph.rho_plus = required("physics.rho_plus", &p.rho_plus, &cx)?;
    ph.rho_minus = required("physics.rho_minus", &p.rho_minus, &cx)?;
    ph.rho_s = cx.take("physics.rho_s", &p.rho_s, defaults.physics.rho_s);
    ph.mu_plus = cx.take("physics.mu_plus", &p.mu_plus, defaults.physics.mu_plus);
    ph.mu_minus = cx.take("physics.mu_minus", &p.mu_minus, defaults.physics.mu_minus);
    ph.lambda0 = cx.take("physics.lambda0", &p.lambda0, defaults.physics.lambda0);
    ph.mu1 = cx.take("physics.mu1", &p.mu1, defaults.physics.mu1);
    ph.mu0 = cx.take("physics.mu0", &p.mu0, defaults.physics.mu0);
    ph.eps = cx.take("physics.eps", &p.eps, defaults.physics.eps);
    ph.gravity = p.gravity.as_ref().map(|s| *s.get_ref());
    if ph.gravity.is_none() {
        cx.provenance.push(format!("physics.gravity = {:?}", ph.gravity()));
    }
    ph.interface_height = cx.take("physics.interface_height", &p.interface_height, defaults.physics.interface_height);
    ph.perturbation = cx.take("physics.perturbation", &p.perturbation, defaults.physics.perturbation);
    ph.periods = match &p.periods {
        Some(s) if *s.get_ref() < 0 => return Err(cx.range("physics.periods", s, "must be non-negative")),
        Some(s) => Some(*s.get_ref() as usize),
        None => {
            cx.provenance.push(format!("physics.periods = {}", cfg.geometry.n));
            None
        }
    };
    for (key, v) in [
        ("physics.rho_plus", &p.rho_plus),
        ("physics.rho_minus", &p.rho_minus),
        ("physics.rho_s", &p.rho_s),
        ("physics.mu_plus", &p.mu_plus),
        ("physics.mu_minus", &p.mu_minus),
        ("physics.lambda0", &p.lambda0),
        ("physics.mu1", &p.mu1),
        ("physics.mu0", &p.mu0),
        ("physics.eps", &p.eps),
    ] {
        if let Some(s) = v {
            if !(*s.get_ref() > 0.0 && s.get_ref().is_finite()) {
                return Err(cx.range(key, s, format!("{} must be positive", s.get_ref())));
            }
        }
    }
    if let Some(s) = &p.interface_height {
        if !(*s.get_ref() > 0.0 && *s.get_ref() < 1.0) {
            return Err(cx.range("physics.interface_height", s, "must lie in (0, 1)"));
        }
    }
    if let Some(s) = &p.perturbation {
        if !(*s.get_ref() >= 0.0) {
            return Err(cx.range("physics.perturbation", s, "must be non-negative"));
        }
    }

    let nr = &raw.numerics;
    let nu = &mut cfg.numerics;
    nu.cfl = cx.take("numerics.cfl", &nr.cfl, defaults.numerics.cfl);
    nu.dt_min = cx.take("numerics.dt_min", &nr.dt_min, defaults.numerics.dt_min);
    nu.dt_max = cx.take("numerics.dt_max", &nr.dt_max, defaults.numerics.dt_max);
    let c = &defaults.numerics.control;
    nu.control.div_tol = cx.take("numerics.div_tol", &nr.div_tol, c.div_tol);
    nu.control.solve_tol = cx.take("numerics.solve_tol", &nr.solve_tol, c.solve_tol);
    nu.control.relax_tol = cx.take("numerics.relax_tol", &nr.relax_tol, c.relax_tol);
    nu.control.max_iters = cx.count("numerics.max_iters", &nr.max_iters, c.max_iters)?;
    nu.control.c_p = cx.take("numerics.c_p", &nr.c_p, c.c_p);
    nu.control.c_p_growth = cx.take("numerics.c_p_growth", &nr.c_p_growth, c.c_p_growth);
    nu.control.c_p_max = cx.take("numerics.c_p_max", &nr.c_p_max, c.c_p_max);
    nu.control.scheme = cx.choice("numerics.pressure_scheme", &nr.pressure_scheme, &SCHEMES, "conjugate")?;
    nu.control.inner = cx.choice("numerics.inner_solver", &nr.inner_solver, &INNER, "direct")?;
    nu.coupling = cx.choice("numerics.coupling", &nr.coupling, &COUPLING, "monolithic")?;
    nu.k_couple = cx.count("numerics.k_couple", &nr.k_couple, defaults.numerics.k_couple)?;
    nu.coupling_tol = cx.take("numerics.coupling_tol", &nr.coupling_tol, defaults.numerics.coupling_tol);
    nu.theta = cx.take("numerics.theta", &nr.theta, defaults.numerics.theta);
    for (key, v, ok) in [
        ("numerics.cfl", &nr.cfl, (|x: f64| x > 0.0 && x <= 1.0) as fn(f64) -> bool),
        ("numerics.dt_min", &nr.dt_min, |x| x > 0.0),
        ("numerics.dt_max", &nr.dt_max, |x| x > 0.0),
        ("numerics.div_tol", &nr.div_tol, |x| x > 0.0),
        ("numerics.solve_tol", &nr.solve_tol, |x| x > 0.0),
        ("numerics.relax_tol", &nr.relax_tol, |x| x > 0.0),
        ("numerics.c_p", &nr.c_p, |x| x > 0.0),
        ("numerics.c_p_growth", &nr.c_p_growth, |x| x >= 1.0),
        ("numerics.c_p_max", &nr.c_p_max, |x| x > 0.0),
        ("numerics.coupling_tol", &nr.coupling_tol, |x| x > 0.0),
        ("numerics.theta", &nr.theta, |x| x > 0.0 && x < 0.5),
    ] {
        if let Some(s) = v {
            if !ok(*s.get_ref()) {
                return Err(cx.range(key, s, format!("{} is out of range", s.get_ref())));
            }
        }
    }

    let sr = &raw.schedule;
    cfg.schedule.t_end = cx.take("schedule.t_end", &sr.t_end, defaults.schedule.t_end);
    cfg.schedule.snapshot_times = cx.take("schedule.snapshot_times", &sr.snapshot_times, Vec::new());
    if let Some(s) = &sr.t_end {
        if !(*s.get_ref() >= 0.0 && s.get_ref().is_finite()) {
            return Err(cx.range("schedule.t_end", s, "must be non-negative"));
        }
    }
    if let Some(s) = &sr.snapshot_times {
        let times = s.get_ref();
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(cx.range("schedule.snapshot_times", s, "must be strictly increasing"));
        }
        if times.iter().any(|&t| !(t >= 0.0 && t <= cfg.schedule.t_end)) {
            return Err(cx.range("schedule.snapshot_times", s, format!("must lie in [0, t_end = {}]", cfg.schedule.t_end)));
        }
    }

    let or = &raw.output;
    cfg.output.dir = cx.take("output.dir", &or.dir, defaults.output.dir.clone());
    match &or.formats {
        Some(s) => {
            cfg.output.formats.clear();
            for name in s.get_ref() {
                let f = cx.choice("output.formats", &Some(Spanned::new(s.span(), name.clone())), &FORMATS, "csv")?;
                if !cfg.output.formats.contains(&f) {
                    cfg.output.formats.push(f);
                }
            }
        }
        None => cx.provenance.push("output.formats = [\"csv\"]".to_string()),
    }

    // Cross-field checks the per-key ones cannot see (grid alignment, dt order).
    cfg.validate().map_err(|e| ConfigError::Range { key: "config".to_string(), line: end, message: e.to_string() })?;
    let grid = cfg.geometry.grid().map_err(|e| ConfigError::Range { key: "geometry".to_string(), line: cx.line(geometry), message: e.to_string() })?;
    muskat_core::build_mask(cfg.geometry.kind, cfg.geometry.n, cfg.geometry.m, cfg.geometry.convention, &grid)
        .map_err(|e| ConfigError::Range { key: "geometry".to_string(), line: cx.line(geometry), message: e.to_string() })?;
    Ok(ParsedConfig { config: cfg, provenance: cx.provenance })
}

/// Writes every key of a configuration; [`parse_config`] reads it back to the
/// same value.
pub fn to_toml(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let g = &cfg.geometry;
    let _ = writeln!(s, "[geometry]");
    let _ = writeln!(s, "kind = {:?}", name_of(&KINDS, g.kind));
    let _ = writeln!(s, "n = {}", g.n);
    let _ = writeln!(s, "m = {:?}", g.m);
    let _ = writeln!(s, "cells_per_period = {}", g.cells_per_period);
    if let Some(ny) = g.ny {
        let _ = writeln!(s, "ny = {ny}");
    }
    let _ = writeln!(s, "convention = {:?}", name_of(&CONVENTIONS, g.convention));
    let p = &cfg.physics;
    let _ = writeln!(s, "\n[physics]");
    let _ = writeln!(s, "mode = {:?}", name_of(&MODES, p.mode));
    for (k, v) in [
        ("rho_plus", p.rho_plus),
        ("rho_minus", p.rho_minus),
        ("rho_s", p.rho_s),
        ("mu_plus", p.mu_plus),
        ("mu_minus", p.mu_minus),
        ("lambda0", p.lambda0),
        ("mu1", p.mu1),
        ("mu0", p.mu0),
        ("eps", p.eps),
    ] {
        let _ = writeln!(s, "{k} = {v:?}");
    }
    if let Some(gr) = p.gravity {
        let _ = writeln!(s, "gravity = {gr:?}");
    }
    let _ = writeln!(s, "interface_height = {:?}", p.interface_height);
    let _ = writeln!(s, "perturbation = {:?}", p.perturbation);
    if let Some(k) = p.periods {
        let _ = writeln!(s, "periods = {k}");
    }
    let n = &cfg.numerics;
    let c = &n.control;
    let _ = writeln!(s, "\n[numerics]");
    let _ = writeln!(s, "cfl = {:?}\ndt_min = {:?}\ndt_max = {:?}", n.cfl, n.dt_min, n.dt_max);
    let _ = writeln!(s, "div_tol = {:?}\nsolve_tol = {:?}\nrelax_tol = {:?}\nmax_iters = {}", c.div_tol, c.solve_tol, c.relax_tol, c.max_iters);
    let _ = writeln!(s, "c_p = {:?}\nc_p_growth = {:?}\nc_p_max = {:?}", c.c_p, c.c_p_growth, c.c_p_max);
    let _ = writeln!(s, "pressure_scheme = {:?}", name_of(&SCHEMES, c.scheme));
    let _ = writeln!(s, "inner_solver = {:?}", name_of(&INNER, c.inner));
    let _ = writeln!(s, "coupling = {:?}", name_of(&COUPLING, n.coupling));
    let _ = writeln!(s, "k_couple = {}\ncoupling_tol = {:?}\ntheta = {:?}", n.k_couple, n.coupling_tol, n.theta);
    let _ = writeln!(s, "\n[schedule]");
    let _ = writeln!(s, "t_end = {:?}", cfg.schedule.t_end);
    let times: Vec<String> = cfg.schedule.snapshot_times.iter().map(|t| format!("{t:?}")).collect();
    let _ = writeln!(s, "snapshot_times = [{}]", times.join(", "));
    let _ = writeln!(s, "\n[output]");
    let _ = writeln!(s, "dir = {:?}", cfg.output.dir);
    let formats: Vec<String> = cfg.output.formats.iter().map(|f| format!("{:?}", name_of(&FORMATS, *f))).collect();
    let _ = writeln!(s, "formats = [{}]", formats.join(", "));
    s
}
