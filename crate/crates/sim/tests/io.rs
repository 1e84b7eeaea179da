use muskat::metrics_io::{parse_json_lines, read_metrics, to_json_lines, write_metrics};
use muskat::output::write_run;
use muskat::snapshot::{parse_csv, parse_vtk, read_csv, read_vtk, to_csv, to_vtk, write_csv, write_vtk, SnapshotData, FIELDS};
use muskat_core::harness::{run_scenario, Mode, ScenarioConfig, SnapshotFormat};
use proptest::prelude::*;

fn uniform(nx: usize, ny: usize, value: f64) -> SnapshotData {
    SnapshotData {
        nx,
        ny,
        h1: 1.0 / nx as f64,
        h2: 1.0 / ny as f64,
        t: 0.0,
        step: 0,
        fields: FIELDS.iter().map(|n| (n.to_string(), vec![value; nx * ny])).collect(),
    }
}

fn small(mode: Mode, t_end: f64, times: Vec<f64>) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.physics.mode = mode;
    c.geometry.n = 2;
    c.geometry.cells_per_period = 8;
    c.schedule.t_end = t_end;
    c.schedule.snapshot_times = times;
    c
}

#[test]
fn two_by_two_csv_has_four_rows() {
    let text = to_csv(&uniform(2, 2, 1.0));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 5);
    assert_eq!(data[0], "i,j,x1,x2,rho,p,u,v,mu,phase,chi");
    assert_eq!(data[1], "0,0,0.25,0.25,1.0,1.0,1.0,1.0,1.0,1.0,1.0");
    assert_eq!(data[4], "1,1,0.75,0.75,1.0,1.0,1.0,1.0,1.0,1.0,1.0");
}

#[test]
fn vtk_layout() {
    let text = to_vtk(&uniform(3, 2, 0.5));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# vtk DataFile Version 3.0");
    assert!(lines.contains(&"DATASET STRUCTURED_POINTS"));
    assert!(lines.contains(&"DIMENSIONS 4 3 1"));
    assert!(lines.contains(&"CELL_DATA 6"));
    assert_eq!(lines.iter().filter(|l| l.starts_with("SCALARS")).count(), FIELDS.len());
}

#[test]
fn run_snapshots_round_trip_and_formats_agree() {
    let out = run_scenario(&small(Mode::Rigid, 200.0, vec![0.0, 200.0])).unwrap();
    assert!(out.failure.is_none());
    let dir = tempfile::tempdir().unwrap();
    let written = write_run(&out, &[SnapshotFormat::Csv, SnapshotFormat::Vtk], dir.path()).unwrap();
    assert_eq!(written.len(), 5);
    for (k, snap) in out.snapshots.iter().enumerate() {
        let expected = SnapshotData::from_snapshot(snap, &out.grid, &out.mask);
        let csv = read_csv(&dir.path().join(format!("snapshot_{k:03}.csv"))).unwrap();
        let vtk = read_vtk(&dir.path().join(format!("snapshot_{k:03}.vtk"))).unwrap();
        assert_eq!(csv, expected);
        assert_eq!(vtk, expected);
        for name in FIELDS {
            let (a, b) = (csv.field(name).unwrap(), vtk.field(name).unwrap());
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()), "{name}");
        }
    }
    let metrics = read_metrics(&dir.path().join("metrics.jsonl")).unwrap();
    assert_eq!(metrics, out.metrics);
}

#[test]
fn face_velocities_averaged_to_centers() {
    let out = run_scenario(&small(Mode::Rigid, 50.0, vec![50.0])).unwrap();
    let s = &out.snapshots[0];
    let data = SnapshotData::from_snapshot(s, &out.grid, &out.mask);
    let v = data.field("v").unwrap();
    let nx = out.grid.nx;
    for (i, j) in [(1, 3), (5, 9), (12, 15)] {
        assert_eq!(v[j * nx + i], 0.5 * (s.v[(i, j)] + s.v[(i, j + 1)]));
    }
    assert!(v.iter().any(|&x| x != 0.0));
}

#[test]
fn empty_run_metrics_two_lines() {
    let out = run_scenario(&small(Mode::Rigid, 0.0, vec![])).unwrap();
    let text = to_json_lines(&out.metrics);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("\"record\":\"snapshot\""));
    assert!(lines[1].contains("\"record\":\"summary\""));
    assert!(lines[1].contains("\"verdicts\""));
    assert_eq!(parse_json_lines(&text).unwrap(), out.metrics);
}

#[test]
fn five_snapshots_six_lines() {
    let out = run_scenario(&small(Mode::Elastic, 100.0, vec![10.0, 20.0, 40.0, 80.0, 100.0])).unwrap();
    assert!(out.failure.is_none(), "{:?}", out.failure);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jsonl");
    write_metrics(&out.metrics, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert_eq!(read_metrics(&path).unwrap(), out.metrics);
}

#[test]
fn metrics_layout_errors() {
    let out = run_scenario(&small(Mode::Rigid, 0.0, vec![])).unwrap();
    let text = to_json_lines(&out.metrics);
    let snapshot_only = text.lines().next().unwrap();
    assert!(parse_json_lines(snapshot_only).is_err());
    assert!(parse_json_lines(&format!("{text}{snapshot_only}\n")).is_err());
    assert!(parse_json_lines("{\"record\":\"other\"}\n").is_err());
}

#[test]
fn malformed_snapshots_rejected() {
    let text = to_csv(&uniform(2, 2, 1.0));
    assert!(parse_csv(&text.replace("0.75,0.75,1.0", "0.75,0.75,x"), "a.csv").is_err());
    assert!(parse_csv(&text.lines().take(12).collect::<Vec<_>>().join("\n"), "a.csv").is_err());
    let vtk = to_vtk(&uniform(2, 2, 1.0));
    assert!(parse_vtk(&vtk.replace("CELL_DATA 4", "CELL_DATA 5"), "a.vtk").is_err());
}

#[test]
fn unwritable_paths_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no/such/dir/s.csv");
    assert!(write_csv(&uniform(2, 2, 1.0), &missing).is_err());
    assert!(write_vtk(&uniform(2, 2, 1.0), &missing).is_err());
    let out = run_scenario(&small(Mode::Rigid, 0.0, vec![])).unwrap();
    assert!(write_metrics(&out.metrics, &missing).is_err());
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    assert!(write_run(&out, &[SnapshotFormat::Csv], &file).is_err());
}

#[test]
fn writers_are_deterministic() {
    let cfg = small(Mode::Elastic, 60.0, vec![0.0, 60.0]);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = write_run(&run_scenario(&cfg).unwrap(), &[SnapshotFormat::Csv, SnapshotFormat::Vtk], a.path()).unwrap();
    let fb = write_run(&run_scenario(&cfg).unwrap(), &[SnapshotFormat::Csv, SnapshotFormat::Vtk], b.path()).unwrap();
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
}

fn arb_data() -> impl Strategy<Value = SnapshotData> {
    (1usize..6, 1usize..6).prop_flat_map(|(nx, ny)| {
        let values = prop::collection::vec(prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), Just(0.0), Just(-0.0), Just(1e-300)], nx * ny);
        (prop::collection::vec(values, FIELDS.len()), 0.0f64..1e4, 0usize..1000).prop_map(move |(cols, t, step)| SnapshotData {
            nx,
            ny,
            h1: 1.0 / nx as f64,
            h2: 1.0 / ny as f64,
            t,
            step,
            fields: FIELDS.iter().map(|n| n.to_string()).zip(cols).collect(),
        })
    })
}

fn same_bits(a: &SnapshotData, b: &SnapshotData) -> bool {
    a.fields.iter().zip(&b.fields).all(|((n, x), (m, y))| n == m && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_and_vtk_round_trip_bitwise(d in arb_data()) {
        let csv = parse_csv(&to_csv(&d), "p.csv").unwrap();
        let vtk = parse_vtk(&to_vtk(&d), "p.vtk").unwrap();
        prop_assert!(same_bits(&csv, &d));
        prop_assert!(same_bits(&vtk, &d));
        prop_assert_eq!((csv.nx, csv.ny, csv.t, csv.step), (d.nx, d.ny, d.t, d.step));
        prop_assert_eq!((vtk.nx, vtk.ny, vtk.t, vtk.step), (d.nx, d.ny, d.t, d.step));
    }
}
