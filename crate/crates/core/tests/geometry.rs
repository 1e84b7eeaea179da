use muskat_core::{build_mask, CellMask, Error, FaceClass, GeometryKind, Location, SquaresConvention, StaggeredGrid};
use proptest::prelude::*;

fn grid(n: usize) -> StaggeredGrid {
    StaggeredGrid::new(n, n).unwrap()
}

#[test]
fn all_fluid_has_no_interface() {
    let g = grid(16);
    let m = build_mask(GeometryKind::AllFluid, 1, 0.5, SquaresConvention::FluidFraction, &g).unwrap();
    assert!(m.chi().iter().all(|&c| c));
    assert_eq!(m.count_faces(FaceClass::Interface), 0);
    assert_eq!(m.count_faces(FaceClass::Outer), 4 * 16);
    assert_eq!(m.count_faces(FaceClass::Fluid), 2 * 15 * 16);
}

#[test]
fn two_capillaries_at_half_porosity() {
    let g = grid(32);
    let m = build_mask(GeometryKind::Capillaries, 2, 0.5, SquaresConvention::FluidFraction, &g).unwrap();
    assert_eq!(m.fluid_fraction(), 0.5);
    for j in 0..32 {
        for i in 0..32 {
            assert_eq!(m.is_fluid(i, j), i < 8 || (16..24).contains(&i), "cell {i},{j}");
        }
    }
    assert_eq!(m.count_faces(FaceClass::Interface), 96);
}

#[test]
fn pore_wall_lines_counted_with_left_boundary() {
    let g = grid(32);
    let m = build_mask(GeometryKind::Capillaries, 2, 0.5, SquaresConvention::FluidFraction, &g).unwrap();
    let left_wall = (0..32).filter(|&j| m.face_class(Location::UFace, 0, j) == FaceClass::Outer && m.is_fluid(0, j)).count();
    assert_eq!(m.count_faces(FaceClass::Interface) + left_wall, 128);
}

#[test]
fn one_square_at_three_quarters() {
    let g = grid(32);
    let m = build_mask(GeometryKind::DisjointSquares, 1, 0.75, SquaresConvention::FluidFraction, &g).unwrap();
    assert_eq!(m.fluid_fraction(), 0.75);
    for j in 0..32 {
        for i in 0..32 {
            let solid = (8..24).contains(&i) && (8..24).contains(&j);
            assert_eq!(m.is_fluid(i, j), !solid);
        }
    }
    assert_eq!(m.count_faces(FaceClass::Interface), 4 * 16);
}

#[test]
fn solid_fraction_convention() {
    let g = grid(32);
    let m = build_mask(GeometryKind::DisjointSquares, 1, 0.25, SquaresConvention::SolidFraction, &g).unwrap();
    assert_eq!(m.fluid_fraction(), 0.75);
}

#[test]
fn single_solid_cell_has_four_interface_faces() {
    let mut chi = vec![true; 64];
    chi[3 * 8 + 4] = false;
    let m = CellMask::from_chi(8, 8, chi).unwrap();
    assert_eq!(m.count_faces(FaceClass::Interface), 4);
    assert_eq!(m.count_faces(FaceClass::Solid), 0);
}

#[test]
fn coarse_periods_rejected() {
    let g = grid(12);
    let r = build_mask(GeometryKind::Capillaries, 4, 0.5, SquaresConvention::FluidFraction, &g);
    assert!(matches!(r, Err(Error::ResolutionTooCoarse { cells: 3 })));
    let g = grid(30);
    let r = build_mask(GeometryKind::Capillaries, 4, 0.5, SquaresConvention::FluidFraction, &g);
    assert!(matches!(r, Err(Error::GridNotAligned { .. })));
}

#[test]
fn thin_strips_rejected() {
    let g = grid(16);
    let r = build_mask(GeometryKind::Capillaries, 4, 0.05, SquaresConvention::FluidFraction, &g);
    assert!(matches!(r, Err(Error::StripTooThin { .. })));
    let r = build_mask(GeometryKind::DisjointSquares, 4, 0.99, SquaresConvention::FluidFraction, &g);
    assert!(matches!(r, Err(Error::StripTooThin { .. })));
}

#[test]
fn porosity_out_of_range() {
    let g = grid(16);
    for m in [0.0, 1.0, 1.5, -0.1] {
        assert!(matches!(build_mask(GeometryKind::Capillaries, 1, m, SquaresConvention::FluidFraction, &g), Err(Error::InvalidParameter { .. })));
    }
}

#[test]
fn porosity_error_decays_with_resolution() {
    let m = 0.6;
    let errors: Vec<f64> = [5usize, 10, 20, 40]
        .iter()
        .map(|&p| {
            let g = StaggeredGrid::new(2 * p, 2 * p).unwrap();
            let mask = build_mask(GeometryKind::DisjointSquares, 2, m, SquaresConvention::FluidFraction, &g).unwrap();
            (mask.fluid_fraction() - m).abs()
        })
        .collect();
    for w in errors.windows(2) {
        assert!(w[1] <= w[0], "{errors:?}");
    }
    assert!(errors[3] < errors[0]);
}

fn shifted(m: &CellMask, dx: usize, dy: usize) -> Vec<bool> {
    (0..m.nx * m.ny)
        .map(|c| {
            let (i, j) = (c % m.nx, c / m.nx);
            m.is_fluid((i + dx) % m.nx, (j + dy) % m.ny)
        })
        .collect()
}

proptest! {
    #[test]
    fn masks_are_periodic(n in 1usize..5, p in 4usize..12, m in 0.2f64..0.8, squares in any::<bool>()) {
        let g = StaggeredGrid::new(n * p, n * p).unwrap();
        let kind = if squares { GeometryKind::DisjointSquares } else { GeometryKind::Capillaries };
        let Ok(mask) = build_mask(kind, n, m, SquaresConvention::FluidFraction, &g) else { return Ok(()) };
        prop_assert_eq!(shifted(&mask, p, 0), mask.chi().to_vec());
        if squares {
            prop_assert_eq!(shifted(&mask, 0, p), mask.chi().to_vec());
        } else {
            prop_assert_eq!(shifted(&mask, 0, 1), mask.chi().to_vec());
        }
        let h = g.h1;
        prop_assert!((mask.fluid_fraction() - m).abs() <= (g.nx + g.ny) as f64 * h * h + 1.0 / p as f64);
    }

    #[test]
    fn interface_faces_separate_phases(nx in 1usize..10, ny in 1usize..10, bits in proptest::collection::vec(any::<bool>(), 100)) {
        let chi: Vec<bool> = bits[..nx * ny].to_vec();
        let mask = CellMask::from_chi(nx, ny, chi.clone()).unwrap();
        let mut boundary = 0;
        for j in 0..ny {
            for i in 0..nx {
                if i + 1 < nx && chi[j * nx + i] != chi[j * nx + i + 1] { boundary += 1; }
                if j + 1 < ny && chi[j * nx + i] != chi[(j + 1) * nx + i] { boundary += 1; }
            }
        }
        prop_assert_eq!(mask.count_faces(FaceClass::Interface), boundary);
        prop_assert_eq!(mask.count_faces(FaceClass::Outer), 2 * (nx + ny));
        let total = (nx + 1) * ny + nx * (ny + 1);
        let sum: usize = [FaceClass::Fluid, FaceClass::Solid, FaceClass::Interface, FaceClass::Outer].iter().map(|&c| mask.count_faces(c)).sum();
        prop_assert_eq!(sum, total);
        prop_assert_eq!(CellMask::from_chi(nx, ny, chi).unwrap(), mask);
    }
}
