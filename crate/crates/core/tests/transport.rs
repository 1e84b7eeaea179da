use muskat_core::transport::{check_max_principle, choose_dt, extrema, init_density, total_mass, upwind_step, InitialData, TransportState};
use muskat_core::{build_mask, CellMask, Error, Field, GeometryKind, Location, SquaresConvention, StaggeredGrid};
use proptest::prelude::*;
use std::f64::consts::PI;

/// Face velocities of a node stream function vanishing on the box; the
/// discrete divergence is zero up to round-off.
fn stream_velocity(g: &StaggeredGrid, psi: impl Fn(f64, f64) -> f64) -> (Field, Field) {
    let node = |i: usize, j: usize| {
        if i == 0 || j == 0 || i == g.nx || j == g.ny {
            0.0
        } else {
            psi(i as f64 * g.h1, j as f64 * g.h2)
        }
    };
    let mut u = Field::zeros(g, Location::UFace);
    let mut v = Field::zeros(g, Location::VFace);
    for j in 0..g.ny {
        for i in 0..=g.nx {
            u[(i, j)] = (node(i, j + 1) - node(i, j)) / g.h2;
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            v[(i, j)] = -(node(i + 1, j) - node(i, j)) / g.h1;
        }
    }
    (u, v)
}

fn state_from(g: &StaggeredGrid, rho: Field, dt: f64, cfl: f64) -> TransportState {
    let domain = vec![true; g.nx * g.ny];
    let mut s = TransportState { mu: rho.clone(), phase: rho.clone(), rho, t: 0.0, dt, cfl, domain, bounds: (0.0, 0.0) };
    s.bounds = extrema(&s, g);
    s
}

#[test]
fn init_uniform_and_half_split() {
    let g = StaggeredGrid::new(16, 16).unwrap();
    let mask = CellMask::all_fluid(16, 16);
    let s = init_density(&g, &mask, &InitialData::sharp(3.0, 3.0, None, 0.37)).unwrap();
    assert!(s.rho.interior().iter().all(|&r| r == 3.0));
    let s = init_density(&g, &mask, &InitialData::sharp(998.2, 800.0, None, 0.5)).unwrap();
    let rho = s.rho.interior();
    assert_eq!(rho.iter().filter(|&&r| r == 998.2).count(), 128);
    assert_eq!(rho.iter().filter(|&&r| r == 800.0).count(), 128);
    for j in 0..8 {
        assert_eq!(s.rho[(5, j)], 998.2);
        assert_eq!(s.phase[(5, j)], 1.0);
    }
}

#[test]
fn init_reference_squares_mass() {
    let g = StaggeredGrid::new(32, 32).unwrap();
    let mask = build_mask(GeometryKind::DisjointSquares, 2, 0.75, SquaresConvention::FluidFraction, &g).unwrap();
    let data = InitialData::sharp(998.2, 800.0, Some(2000.0), 0.5);
    let a = init_density(&g, &mask, &data).unwrap();
    let b = init_density(&g, &mask, &data).unwrap();
    let m = total_mass(&a, &g);
    assert_eq!(m.to_bits(), total_mass(&b, &g).to_bits());
    // Half of the pores heavy, half light, a quarter of the box solid.
    let expected = 0.375 * 998.2 + 0.375 * 800.0 + 0.25 * 2000.0;
    assert!((m - expected).abs() <= 1e-9 * expected, "{m} {expected}");
    let rigid = init_density(&g, &mask, &InitialData::sharp(998.2, 800.0, None, 0.5)).unwrap();
    assert_eq!(rigid.domain.iter().filter(|&&d| d).count(), 768);
}

#[test]
fn init_rejects_interface_outside_box() {
    let g = StaggeredGrid::new(4, 4).unwrap();
    let mask = CellMask::all_fluid(4, 4);
    for h in [0.0, 1.0, -0.5, 2.0] {
        assert!(init_density(&g, &mask, &InitialData::sharp(2.0, 1.0, None, h)).is_err());
    }
}

#[test]
fn seeded_interface_conserves_layer_volume() {
    let g = StaggeredGrid::new(32, 32).unwrap();
    let mask = CellMask::all_fluid(32, 32);
    let mut data = InitialData::sharp(2.0, 1.0, None, 0.5);
    data.perturbation = 0.5;
    data.periods = 4;
    let s = init_density(&g, &mask, &data).unwrap();
    let heavy: f64 = s.phase.interior().iter().sum::<f64>() * g.cell_area();
    assert!((heavy - 0.5).abs() < 1e-12);
    assert!(s.phase.interior().iter().any(|&f| f > 0.0 && f < 1.0));
}

#[test]
fn choose_dt_examples() {
    let g = StaggeredGrid::new(10, 10).unwrap();
    let zu = Field::zeros(&g, Location::UFace);
    let zv = Field::zeros(&g, Location::VFace);
    assert_eq!(choose_dt(&zu, &zv, &g, 0.5, 1e-9, 7.0), 7.0);
    let mut u = zu.clone();
    u[(3, 4)] = -1.0;
    assert!((choose_dt(&u, &zv, &g, 0.5, 1e-9, 7.0) - 0.05).abs() < 1e-15);
    let u = Field::constant(&g, Location::UFace, 2.0);
    let v = Field::constant(&g, Location::VFace, -2.0);
    assert!((choose_dt(&u, &v, &g, 0.8, 1e-9, 7.0) - 0.02).abs() < 1e-15);
    assert_eq!(choose_dt(&u, &v, &g, 0.8, 0.1, 7.0), 0.1);
}

#[test]
fn zero_velocity_leaves_state() {
    let g = StaggeredGrid::new(8, 8).unwrap();
    let rho = Field::from_fn(&g, Location::Center, |x, y| 1.0 + x * y);
    let s = state_from(&g, rho, 0.3, 0.5);
    let mask = CellMask::all_fluid(8, 8);
    let next = upwind_step(&s, &Field::zeros(&g, Location::UFace), &Field::zeros(&g, Location::VFace), &g, &mask).unwrap();
    assert_eq!(next.rho, s.rho);
    assert_eq!(next.t, 0.3);
}

#[test]
fn courant_one_shifts_exactly() {
    let (nx, k) = (32usize, 7usize);
    let g = StaggeredGrid::new(nx, 1).unwrap();
    let mask = CellMask::all_fluid(nx, 1);
    let rho = Field::from_fn(&g, Location::Center, |x, _| if x < 0.3 { 998.2 } else { 800.0 });
    let initial = rho.clone();
    let mut u = Field::constant(&g, Location::UFace, 1.0);
    u[(0, 0)] = 0.0;
    u[(nx, 0)] = 0.0;
    let v = Field::zeros(&g, Location::VFace);
    let mut s = state_from(&g, rho, g.h1, 1.0);
    for _ in 0..k {
        s = upwind_step(&s, &u, &v, &g, &mask).unwrap();
    }
    for i in k..nx - 1 {
        assert_eq!(s.rho[(i, 0)].to_bits(), initial[(i - k, 0)].to_bits(), "cell {i}");
    }
}

#[test]
fn cfl_violation_refused() {
    let g = StaggeredGrid::new(8, 8).unwrap();
    let (u, v) = stream_velocity(&g, |x, y| (PI * x).sin() * (PI * y).sin());
    let rate = u.max_abs() / g.h1 + v.max_abs() / g.h2;
    let s = state_from(&g, Field::constant(&g, Location::Center, 1.0), 1.0 / rate, 0.5);
    match upwind_step(&s, &u, &v, &g, &CellMask::all_fluid(8, 8)) {
        Err(Error::Cfl { required, .. }) => assert!((required - 0.5 / rate).abs() < 1e-15),
        other => panic!("{other:?}"),
    }
}

#[test]
fn open_boundary_refused() {
    let g = StaggeredGrid::new(8, 8).unwrap();
    let s = state_from(&g, Field::constant(&g, Location::Center, 1.0), 1e-3, 0.5);
    let mut u = Field::zeros(&g, Location::UFace);
    u[(0, 3)] = 1.0;
    let r = upwind_step(&s, &u, &Field::zeros(&g, Location::VFace), &g, &CellMask::all_fluid(8, 8));
    assert!(matches!(r, Err(Error::OpenBoundary { .. })));
}

#[test]
fn ten_thousand_steps_conserve_mass() {
    let g = StaggeredGrid::new(24, 24).unwrap();
    let mask = CellMask::all_fluid(24, 24);
    let (u, v) = stream_velocity(&g, |x, y| (PI * x).sin().powi(2) * (PI * y).sin().powi(2) * (1.0 + x));
    let rho = Field::from_fn(&g, Location::Center, |x, y| if y < 0.5 + 0.1 * (2.0 * PI * x).cos() { 998.2 } else { 800.0 });
    let dt = choose_dt(&u, &v, &g, 0.9, 1e-9, 1.0);
    let mut s = state_from(&g, rho, dt, 0.9);
    let m0 = total_mass(&s, &g);
    for step in 1..=10_000 {
        s = upwind_step(&s, &u, &v, &g, &mask).unwrap();
        check_max_principle(&s, &g, 1e-12 * 998.2 * step as f64).unwrap();
    }
    let drift = (total_mass(&s, &g) - m0).abs() / m0;
    assert!(drift <= 1e-8, "{drift}");
}

#[test]
fn first_order_consistency() {
    let err = |n: usize| {
        let g = StaggeredGrid::new(n, n).unwrap();
        let (u, v) = stream_velocity(&g, |x, y| (PI * x).sin().powi(2) * (PI * y).sin().powi(2));
        let f = |x: f64, y: f64| (2.0 * x).sin() + (3.0 * y).cos();
        let s = state_from(&g, Field::from_fn(&g, Location::Center, f), 1e-4, 1.0);
        let next = upwind_step(&s, &u, &v, &g, &CellMask::all_fluid(n, n)).unwrap();
        let mut e = 0.0f64;
        for j in n / 4..3 * n / 4 {
            for i in n / 4..3 * n / 4 {
                let (x, y) = g.position(Location::Center, i as isize, j as isize);
                let uc = 0.5 * (u[(i, j)] + u[(i + 1, j)]);
                let vc = 0.5 * (v[(i, j)] + v[(i, j + 1)]);
                let exact = -(uc * 2.0 * (2.0 * x).cos() - vc * 3.0 * (3.0 * y).sin());
                e = e.max(((next.rho[(i, j)] - s.rho[(i, j)]) / s.dt - exact).abs());
            }
        }
        e
    };
    let e: Vec<f64> = [16, 32, 64].iter().map(|&n| err(n)).collect();
    for w in e.windows(2) {
        assert!((w[0] / w[1]).log2() > 0.8, "{e:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn admissible_steps_keep_bounds_and_mass(
        n in 4usize..16,
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        cfl in 0.1f64..1.0,
        vals in proptest::collection::vec(0.0f64..1.0, 256),
        steps in 1usize..20,
    ) {
        let g = StaggeredGrid::new(n, n).unwrap();
        let mask = CellMask::all_fluid(n, n);
        let (u, v) = stream_velocity(&g, |x, y| (PI * x).sin() * (PI * y).sin() * (a + b * x * y));
        let rho = Field::from_interior(&g, Location::Center, &vals[..n * n].iter().map(|r| 800.0 + 200.0 * r).collect::<Vec<_>>()).unwrap();
        let dt = choose_dt(&u, &v, &g, cfl, 1e-12, 1.0);
        let mut s = state_from(&g, rho, dt, cfl);
        let m0 = total_mass(&s, &g);
        for _ in 0..steps {
            s = upwind_step(&s, &u, &v, &g, &mask).unwrap();
            prop_assert!(check_max_principle(&s, &g, 1e-12 * 1000.0).is_ok());
        }
        prop_assert!((total_mass(&s, &g) - m0).abs() <= 1e-13 * m0 * steps as f64);
    }

    #[test]
    fn uniform_density_preserved(n in 4usize..16, a in -2.0f64..2.0, c in 1.0f64..1000.0) {
        let g = StaggeredGrid::new(n, n).unwrap();
        let (u, v) = stream_velocity(&g, |x, y| a * (PI * x).sin() * (PI * y).sin().powi(2));
        let dt = choose_dt(&u, &v, &g, 0.5, 1e-12, 1.0);
        let s = state_from(&g, Field::constant(&g, Location::Center, c), dt, 0.5);
        let next = upwind_step(&s, &u, &v, &g, &CellMask::all_fluid(n, n)).unwrap();
        for r in next.rho.interior() {
            prop_assert!((r - c).abs() <= 1e-12 * c);
        }
    }
}
