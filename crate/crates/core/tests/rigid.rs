use muskat_core::grid::divergence;
use muskat_core::stokes::{intermediate_velocity, pressure_velocity_iteration, stationary_stokes_solve, StokesParams};
use muskat_core::{build_mask, CellMask, Field, GeometryKind, InnerSolver, Location, PressureScheme, SquaresConvention, StaggeredGrid};

fn fluid_div(u: &Field, v: &Field, g: &StaggeredGrid, mask: &CellMask) -> f64 {
    let d = divergence(u, v, g).unwrap();
    let mut m = 0.0f64;
    for j in 0..g.ny {
        for i in 0..g.nx {
            if mask.is_fluid(i, j) {
                m = m.max(d[(i, j)].abs());
            }
        }
    }
    m
}

fn fluid_mean(p: &Field, mask: &CellMask) -> f64 {
    let (mut s, mut n) = (0.0, 0.0);
    for j in 0..mask.ny {
        for i in 0..mask.nx {
            if mask.is_fluid(i, j) {
                s += p[(i, j)];
                n += 1.0;
            }
        }
    }
    s / n
}

fn zeros(g: &StaggeredGrid) -> Field {
    Field::zeros(g, Location::Center)
}

fn ones(g: &StaggeredGrid) -> Field {
    Field::constant(g, Location::Center, 1.0)
}

#[test]
fn hydrostatic_balance() {
    let g = StaggeredGrid::new(64, 64).unwrap();
    let mask = CellMask::all_fluid(64, 64);
    let s = stationary_stokes_solve(&g, &ones(&g), &ones(&g), &mask, &StokesParams::default(), &zeros(&g)).unwrap();
    assert!(s.u.max_abs().max(s.v.max_abs()) <= 1e-6);
    let tol = 4.0 * g.h2 * g.h2;
    for j in 0..64 {
        for i in 0..64 {
            let (_, y) = g.position(Location::Center, i as isize, j as isize);
            assert!((s.p[(i, j)] - (y - 0.5)).abs() <= tol);
        }
    }
}

#[test]
fn hydrostatic_with_artificial_compressibility() {
    let g = StaggeredGrid::new(16, 16).unwrap();
    let mask = CellMask::all_fluid(16, 16);
    let mut params = StokesParams::default();
    params.control.scheme = PressureScheme::ArtificialCompressibility;
    let rho = Field::constant(&g, Location::Center, 2.0);
    let s = stationary_stokes_solve(&g, &rho, &ones(&g), &mask, &params, &zeros(&g)).unwrap();
    assert!(s.diagnostics.final_c_p.unwrap() > params.control.c_p);
    assert!(s.u.max_abs().max(s.v.max_abs()) <= 1e-6);
    for j in 0..16 {
        let (_, y) = g.position(Location::Center, 0, j as isize);
        assert!((s.p[(3, j)] - 2.0 * (y - 0.5)).abs() <= 4.0 * g.h2 * g.h2);
    }
}

#[test]
fn zero_density_gives_zero_velocity() {
    let g = StaggeredGrid::new(8, 8).unwrap();
    let mask = CellMask::all_fluid(8, 8);
    let (u, v, _) = intermediate_velocity(&g, &zeros(&g), &ones(&g), &mask, &StokesParams::default()).unwrap();
    assert_eq!(u.max_abs(), 0.0);
    assert_eq!(v.max_abs(), 0.0);
}

#[test]
fn poiseuille_profile() {
    let g = StaggeredGrid::new(128, 64).unwrap();
    let mask = build_mask(GeometryKind::Capillaries, 1, 0.25, SquaresConvention::FluidFraction, &g).unwrap();
    let a = 0.25;
    let params = StokesParams { mu1: 2.0, eps: 0.5, ..StokesParams::default() };
    let rho0 = 3.0;
    let rho = Field::constant(&g, Location::Center, rho0);
    let (u, v, _) = intermediate_velocity(&g, &rho, &ones(&g), &mask, &params).unwrap();
    assert_eq!(u.max_abs(), 0.0);
    let coef = params.coefficient();
    let (mut err, mut peak) = (0.0f64, 0.0f64);
    let j = 32;
    for i in 0..32 {
        let x = (i as f64 + 0.5) * g.h1;
        let exact = rho0 * x * (a - x) / (2.0 * coef);
        peak = peak.max(exact);
        err = err.max((0.5 * (v[(i, j)] + v[(i, j + 1)]) - exact).abs());
    }
    assert!(err / peak <= 0.02, "relative error {}", err / peak);
    for i in 32..128 {
        assert_eq!(v[(i, j)], 0.0);
    }
}

#[test]
fn relaxation_matches_direct() {
    let g = StaggeredGrid::new(16, 16).unwrap();
    let mask = build_mask(GeometryKind::Capillaries, 2, 0.5, SquaresConvention::FluidFraction, &g).unwrap();
    let rho = Field::from_fn(&g, Location::Center, |x, y| if y < 0.5 + 0.1 * (6.0 * x).cos() { 1.2 } else { 1.0 });
    let direct = StokesParams::default();
    let mut relax = direct;
    relax.control.inner = InnerSolver::Relaxation;
    relax.control.relax_tol = 1e-12;
    let (ud, vd, _) = intermediate_velocity(&g, &rho, &ones(&g), &mask, &direct).unwrap();
    let (ur, vr, dr) = intermediate_velocity(&g, &rho, &ones(&g), &mask, &relax).unwrap();
    assert!(dr.inner_iterations > 2);
    let scale = vd.max_abs();
    let mut diff = ud.clone();
    diff.axpy(-1.0, &ur);
    assert!(diff.max_abs() <= 1e-8 * scale);
    let mut diff = vd.clone();
    diff.axpy(-1.0, &vr);
    assert!(diff.max_abs() <= 1e-8 * scale);
}

fn stratified(g: &StaggeredGrid) -> Field {
    Field::from_fn(g, Location::Center, |x, y| if y < 0.5 + 0.08 * (2.0 * std::f64::consts::PI * x).cos() { 998.2 } else { 800.0 })
}

#[test]
fn stratified_capillaries_drive_flow() {
    let g = StaggeredGrid::new(64, 64).unwrap();
    let mask = build_mask(GeometryKind::Capillaries, 4, 0.5, SquaresConvention::FluidFraction, &g).unwrap();
    let visc = Field::from_fn(&g, Location::Center, |x, y| if y < 0.5 + 0.08 * (2.0 * std::f64::consts::PI * x).cos() { 1e-2 } else { 0.9 });
    let params = StokesParams { eps: 2e-5, gravity: 4e-13, ..StokesParams::default() };
    let s = stationary_stokes_solve(&g, &stratified(&g), &visc, &mask, &params, &zeros(&g)).unwrap();
    assert!(fluid_div(&s.u, &s.v, &g, &mask) <= 1e-6);
    assert!(s.v.max_abs() > 0.0);
    assert!(fluid_mean(&s.p, &mask).abs() <= 1e-12 * s.p.max_abs().max(1e-300));
}

#[test]
fn divergence_free_start_keeps_pressure() {
    let g = StaggeredGrid::new(12, 12).unwrap();
    let mask = CellMask::all_fluid(12, 12);
    let params = StokesParams::default();
    let rho = zeros(&g);
    let (u, v, _) = intermediate_velocity(&g, &rho, &ones(&g), &mask, &params).unwrap();
    let s = pressure_velocity_iteration(&g, (&u, &v), &rho, &ones(&g), &mask, &params, &zeros(&g)).unwrap();
    assert_eq!(s.p.max_abs(), 0.0);
    assert_eq!(s.u, u);
    assert_eq!(s.v, v);
}

#[test]
fn warm_start_reaches_the_same_state() {
    let g = StaggeredGrid::new(16, 16).unwrap();
    let mask = build_mask(GeometryKind::DisjointSquares, 2, 0.75, SquaresConvention::FluidFraction, &g).unwrap();
    let params = StokesParams::default();
    let rho = stratified(&g);
    let cold = stationary_stokes_solve(&g, &rho, &ones(&g), &mask, &params, &zeros(&g)).unwrap();
    let warm = stationary_stokes_solve(&g, &rho, &ones(&g), &mask, &params, &cold.p).unwrap();
    let mut d = warm.v.clone();
    d.axpy(-1.0, &cold.v);
    assert!(d.max_abs() <= 1e-6 * cold.v.max_abs().max(1.0));
    assert!(warm.diagnostics.outer_iterations <= cold.diagnostics.outer_iterations);
    let (ut, vt, _) = intermediate_velocity(&g, &rho, &ones(&g), &mask, &params).unwrap();
    let split = pressure_velocity_iteration(&g, (&ut, &vt), &rho, &ones(&g), &mask, &params, &cold.p).unwrap();
    let mut d = split.v.clone();
    d.axpy(-1.0, &cold.v);
    assert!(d.max_abs() <= 1e-6 * cold.v.max_abs().max(1.0));
}

#[test]
fn solver_is_linear_in_the_load() {
    let g = StaggeredGrid::new(16, 16).unwrap();
    let mask = build_mask(GeometryKind::Capillaries, 2, 0.5, SquaresConvention::FluidFraction, &g).unwrap();
    let params = StokesParams::default();
    let rho = stratified(&g);
    let a = stationary_stokes_solve(&g, &rho, &ones(&g), &mask, &params, &zeros(&g)).unwrap();
    let b = stationary_stokes_solve(&g, &rho.map(|r| 3.0 * r), &ones(&g), &mask, &params, &zeros(&g)).unwrap();
    let mut d = b.v.clone();
    d.axpy(-3.0, &a.v);
    assert!(d.max_abs() <= 1e-6 * b.v.max_abs());
    let mut d = b.p.clone();
    d.axpy(-3.0, &a.p);
    assert!(d.max_abs() <= 1e-6 * b.p.max_abs());
}

#[test]
fn mirror_symmetry() {
    let g = StaggeredGrid::new(16, 16).unwrap();
    let mask = build_mask(GeometryKind::DisjointSquares, 2, 0.75, SquaresConvention::FluidFraction, &g).unwrap();
    let rho = Field::from_fn(&g, Location::Center, |x, y| if y < 0.5 + 0.1 * (2.0 * std::f64::consts::PI * x).cos() { 2.0 } else { 1.0 });
    let s = stationary_stokes_solve(&g, &rho, &ones(&g), &mask, &StokesParams::default(), &zeros(&g)).unwrap();
    let scale = s.v.max_abs();
    for j in 0..16 {
        for i in 0..=16 {
            assert!((s.u[(i, j)] + s.u[(16 - i, j)]).abs() <= 1e-9 * scale);
        }
    }
    for j in 0..=16 {
        for i in 0..16 {
            assert!((s.v[(i, j)] - s.v[(15 - i, j)]).abs() <= 1e-9 * scale);
        }
    }
}

#[test]
fn invalid_parameters_rejected() {
    let g = StaggeredGrid::new(4, 4).unwrap();
    let mask = CellMask::all_fluid(4, 4);
    let mut p = StokesParams::default();
    p.mu1 = 0.0;
    assert!(stationary_stokes_solve(&g, &ones(&g), &ones(&g), &mask, &p, &zeros(&g)).is_err());
    let mut p = StokesParams::default();
    p.control.c_p_growth = 0.5;
    assert!(stationary_stokes_solve(&g, &ones(&g), &ones(&g), &mask, &p, &zeros(&g)).is_err());
    let bad = Field::zeros(&g, Location::UFace);
    assert!(stationary_stokes_solve(&g, &bad, &ones(&g), &mask, &StokesParams::default(), &zeros(&g)).is_err());
}
