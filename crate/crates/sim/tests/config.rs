use muskat::config::{parse_config, to_toml, ConfigError};
use muskat_core::elastic::CouplingScheme;
use muskat_core::harness::{Mode, ScenarioConfig, SnapshotFormat};
use muskat_core::{GeometryKind, PressureScheme, SquaresConvention};
use proptest::prelude::*;
use std::path::Path;

const MINIMAL: &str = "[geometry]\nkind = \"capillaries\"\n\n[physics]\nrho_plus = 998.2\nrho_minus = 800.0\n";

#[test]
fn minimal_file_gets_documented_defaults() {
    let parsed = parse_config(MINIMAL).unwrap();
    let mut expected = ScenarioConfig::default();
    expected.geometry.kind = GeometryKind::Capillaries;
    assert_eq!(parsed.config, expected);
    for key in ["geometry.n", "geometry.m", "physics.mode", "physics.gravity", "numerics.cfl", "numerics.solve_tol", "numerics.coupling", "schedule.t_end", "output.formats"] {
        assert!(parsed.provenance.iter().any(|l| l.starts_with(&format!("{key} = "))), "{key} missing from {:?}", parsed.provenance);
    }
    assert!(!parsed.provenance.iter().any(|l| l.starts_with("geometry.kind") || l.starts_with("physics.rho_plus")));
}

#[test]
fn reference_elastic_column() {
    let text = "[geometry]\nkind = \"disjoint_squares\"\n\n[physics]\nmode = \"elastic\"\nrho_plus = 998.2\nrho_minus = 800.0\nrho_s = 2000.0\nlambda0 = 0.5\nmu_plus = 1e-2\nmu_minus = 9e-1\n";
    let c = parse_config(text).unwrap().config;
    assert_eq!(c.physics.mode, Mode::Elastic);
    assert_eq!(c.geometry.kind, GeometryKind::DisjointSquares);
    assert_eq!((c.physics.rho_s, c.physics.lambda0, c.physics.mu_plus, c.physics.mu_minus), (2000.0, 0.5, 1e-2, 0.9));
}

#[test]
fn porosity_out_of_range_names_key_and_line() {
    let text = "[geometry]\nkind = \"capillaries\"\nm = 1.5\n\n[physics]\nrho_plus = 1.0\nrho_minus = 1.0\n";
    match parse_config(text) {
        Err(ConfigError::Range { key, line, .. }) => assert_eq!((key.as_str(), line), ("geometry.m", 3)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_key_reported_with_line() {
    let text = "[geometry]\nkind = \"capillaries\"\n\n[physics]\nrho_plus = 1.0\nrho_minus = 1.0\nviscosity = 2.0\n";
    match parse_config(text) {
        Err(e @ ConfigError::Syntax { line: 7, .. }) => assert!(e.to_string().contains("viscosity"), "{e}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_required_keys() {
    let text = "[geometry]\nkind = \"capillaries\"\n\n[physics]\nrho_plus = 1.0\n";
    assert!(matches!(parse_config(text), Err(ConfigError::Missing { key: "physics.rho_minus", line: 4 })));
    let text = "[geometry]\nn = 2\n\n[physics]\nrho_plus = 1.0\nrho_minus = 1.0\n";
    assert!(matches!(parse_config(text), Err(ConfigError::Missing { key: "geometry.kind", line: 1 })));
    assert!(matches!(parse_config(""), Err(ConfigError::Missing { key: "geometry.kind", .. })));
}

#[test]
fn bad_values_rejected() {
    let base = |extra: &str| format!("{MINIMAL}{extra}");
    for (extra, key) in [
        ("\n[numerics]\ncfl = 1.5\n", "numerics.cfl"),
        ("\n[numerics]\nsolve_tol = 0.0\n", "numerics.solve_tol"),
        ("\n[numerics]\npressure_scheme = \"multigrid\"\n", "numerics.pressure_scheme"),
        ("\n[schedule]\nt_end = 10.0\nsnapshot_times = [5.0, 2.0]\n", "schedule.snapshot_times"),
        ("\n[schedule]\nt_end = 10.0\nsnapshot_times = [20.0]\n", "schedule.snapshot_times"),
        ("\n[output]\nformats = [\"hdf5\"]\n", "output.formats"),
    ] {
        match parse_config(&base(extra)) {
            Err(ConfigError::Range { key: k, .. }) => assert_eq!(k, key),
            other => panic!("{extra}: {other:?}"),
        }
    }
    let text = "[geometry]\nkind = \"capillaries\"\nn = 0\n\n[physics]\nrho_plus = 1.0\nrho_minus = 1.0\n";
    assert!(matches!(parse_config(text), Err(ConfigError::Range { line: 3, .. })));
    let text = "[geometry]\nkind = \"capillaries\"\nm = 0.01\n\n[physics]\nrho_plus = 1.0\nrho_minus = 1.0\n";
    assert!(matches!(parse_config(text), Err(ConfigError::Range { .. })));
    assert!(matches!(parse_config("[geometry\n"), Err(ConfigError::Syntax { line: 1, .. })));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let parsed = parse_config(&std::fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parsed.config.schedule.snapshot_times, vec![50.0, 860.0, 2631.0, 3012.0, 4873.0]);
        count += 1;
    }
    assert_eq!(count, 8);
}

#[test]
fn emitted_file_lists_every_key() {
    let parsed = parse_config(&to_toml(&ScenarioConfig::default())).unwrap();
    assert_eq!(parsed.config, ScenarioConfig::default());
    assert!(parsed.provenance.iter().all(|l| l.starts_with("physics.gravity") || l.starts_with("physics.periods")), "{:?}", parsed.provenance);
}

fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
    (
        (prop_oneof![Just(GeometryKind::Capillaries), Just(GeometryKind::DisjointSquares), Just(GeometryKind::AllFluid)], 1usize..6, 0.3f64..0.7, prop_oneof![Just(8usize), Just(16), Just(32)]),
        (prop_oneof![Just(Mode::Rigid), Just(Mode::Elastic)], 1.0f64..2000.0, 1.0f64..2000.0, 1e-3f64..10.0, proptest::option::of(1e-15f64..1.0), 0.1f64..0.9),
        (0.05f64..1.0, 1e-8f64..1e-3, prop_oneof![Just(PressureScheme::Conjugate), Just(PressureScheme::ArtificialCompressibility)], prop_oneof![Just(CouplingScheme::Monolithic), Just(CouplingScheme::Partitioned)]),
        (0.0f64..1e4, prop::collection::vec(0.0f64..1.0, 0..4), any::<bool>()),
    )
        .prop_map(|(g, p, n, s)| {
            let mut c = ScenarioConfig::default();
            (c.geometry.kind, c.geometry.n, c.geometry.m, c.geometry.cells_per_period) = g;
            c.geometry.convention = if g.1 % 2 == 0 { SquaresConvention::SolidFraction } else { SquaresConvention::FluidFraction };
            (c.physics.mode, c.physics.rho_plus, c.physics.rho_minus, c.physics.lambda0, c.physics.gravity, c.physics.interface_height) = p;
            (c.numerics.cfl, c.numerics.control.div_tol, c.numerics.control.scheme, c.numerics.coupling) = n;
            c.schedule.t_end = s.0;
            let mut times: Vec<f64> = s.1.iter().map(|f| f * s.0).collect();
            times.sort_by(f64::total_cmp);
            times.dedup();
            c.schedule.snapshot_times = times;
            if s.2 {
                c.output.formats = vec![SnapshotFormat::Vtk, SnapshotFormat::Csv];
            }
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn emitted_toml_reads_back(c in arb_config()) {
        let text = to_toml(&c);
        match parse_config(&text) {
            Ok(parsed) => prop_assert_eq!(parsed.config, c),
            // Random geometry can be too coarse for its strips; that must be
            // a reported range error, never a panic.
            Err(ConfigError::Range { key, .. }) => prop_assert_eq!(key, "geometry"),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}
