use std::f64::consts::PI;
use std::path::Path;

use kwe::cli_io::csv::format_f64;
use kwe::cli_io::initial::smooth_bump;
use kwe::cli_io::snapshot::{decode_snapshot, encode_snapshot};
use kwe::cli_io::{
    format_report_row, initial_condition, load_config, parse_config, read_snapshot, write_reports, write_snapshot,
    InitialParams, CSV_HEADER, SNAPSHOT_MAGIC,
};
use kwe::diagnostics::NormReport;
use kwe::phase_grid::{weighted_norm, NormKind};
use kwe::{DistributionField, KweError, PhaseSpaceGrid, SpatialGrid, VelocityGrid};
use proptest::prelude::*;

fn config_error(text: &str) -> (String, String) {
    match parse_config(text, Path::new("/tmp")) {
        Err(KweError::Config { path, message }) => (path, message),
        Err(e) => panic!("expected a config error, got {e}"),
        Ok(_) => panic!("expected a config error for {text:?}"),
    }
}

#[test]
fn csv_header_is_fixed() {
    assert_eq!(
        CSV_HEADER,
        "time,l1_xv,linfM_xv,linfx_l2v_alpha,l2x_l1v_w,mass,px,py,pz,energy,momentN,min_value,boundary_mass_lost"
    );
}

#[test]
fn csv_rows_round_trip_every_column() {
    let r = NormReport {
        time: 0.1,
        l1_xv: 1.0 / 3.0,
        linf_m_xv: 2.5e-300,
        linfx_l2v_alpha: PI,
        l2x_l1v_w: 1e20,
        mass: 0.123456789012345678,
        momentum: [-0.0, 1e-17, -7.25],
        energy: f64::MIN_POSITIVE,
        moment_n: 42.0,
        min_value: -1e-13,
        boundary_mass_lost: 0.0,
    };
    let row = format_report_row(&r);
    let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
    let want = [
        r.time, r.l1_xv, r.linf_m_xv, r.linfx_l2v_alpha, r.l2x_l1v_w, r.mass, r.momentum[0], r.momentum[1],
        r.momentum[2], r.energy, r.moment_n, r.min_value, r.boundary_mass_lost,
    ];
    assert_eq!(cols.len(), CSV_HEADER.split(',').count());
    for (a, b) in cols.iter().zip(&want) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(format_f64(0.1).parse::<f64>().unwrap(), 0.1);
}

#[test]
fn write_reports_emits_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ts.csv");
    let rows = vec![NormReport::default(), NormReport { time: 1.0, ..Default::default() }];
    write_reports(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], CSV_HEADER);
    assert!(lines[2].starts_with("1"));
}

fn snapshot_field() -> DistributionField {
    let grid = PhaseSpaceGrid::new(SpatialGrid::new(1, 3.0, 4).unwrap(), VelocityGrid::new(2.0, 3).unwrap());
    let mut f = DistributionField::from_fn(grid, |x, v| (x[0] + 0.1) * (v[0] - 2.0 * v[1] + v[2]).sin());
    f.time = 2.75;
    f
}

#[test]
fn snapshot_layout_is_documented() {
    let f = snapshot_field();
    let bytes = encode_snapshot(&f);
    assert_eq!(&bytes[..4], SNAPSHOT_MAGIC);
    let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
    let f64_at = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    assert_eq!((u32_at(4), u32_at(8), u32_at(12)), (1, 4, 3));
    assert_eq!((f64_at(16), f64_at(24), f64_at(32)), (2.0, 3.0, 2.75));
    assert_eq!(bytes.len(), 40 + 8 * f.values.len());
    // x-major, then v with x fastest
    assert_eq!(f64_at(40 + 8 * 28), f.values[28]);
}

#[test]
fn snapshot_files_round_trip_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.kwe");
    let f = snapshot_field();
    write_snapshot(&path, &f).unwrap();
    let g = read_snapshot(&path).unwrap();
    assert_eq!(g.grid, f.grid);
    assert_eq!(g.time.to_bits(), f.time.to_bits());
    assert!(f.values.iter().zip(&g.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    let h = DistributionField::zeros(PhaseSpaceGrid::homogeneous(VelocityGrid::new(1.0, 3).unwrap()));
    assert_eq!(decode_snapshot(&encode_snapshot(&h)).unwrap().values, h.values);
}

#[test]
fn corrupt_snapshots_are_rejected() {
    let good = encode_snapshot(&snapshot_field());
    let mut bad = good.clone();
    bad[3] = b'2';
    assert!(matches!(decode_snapshot(&bad), Err(KweError::Format(_))));
    assert!(matches!(decode_snapshot(&good[..20]), Err(KweError::Format(_))));
    assert!(matches!(decode_snapshot(&good[..good.len() - 8]), Err(KweError::Format(_))));
    let mut longer = good.clone();
    longer.extend_from_slice(&[0; 8]);
    assert!(decode_snapshot(&longer).is_err());
    assert!(matches!(read_snapshot(Path::new("/nonexistent/s.kwe")), Err(KweError::Io(_))));
}

#[test]
fn gaussian_initial_mass_matches_closed_form() {
    let p = InitialParams { amplitude: 0.02, s_v: 0.8, ..Default::default() };
    let grid = PhaseSpaceGrid::homogeneous(VelocityGrid::new(6.0, 31).unwrap());
    let f = initial_condition("gaussian", &p, grid).unwrap();
    let want = 0.02 * (2.0 * PI * 0.64f64).powf(1.5);
    assert!((weighted_norm(&f, 0.0, NormKind::L1Xv) / want - 1.0).abs() < 1e-12);
    assert!(f.nonneg_asserted);

    let grid = PhaseSpaceGrid::new(SpatialGrid::new(1, 8.0, 65).unwrap(), VelocityGrid::new(6.0, 31).unwrap());
    let f = initial_condition("gaussian", &p, grid).unwrap();
    let want = want * (2.0 * PI).sqrt();
    assert!((weighted_norm(&f, 0.0, NormKind::L1Xv) / want - 1.0).abs() < 1e-12);
}

#[test]
fn bump_and_rayleigh_jeans_profiles() {
    assert_eq!(smooth_bump(0.0), 1.0);
    assert_eq!(smooth_bump(1.0), 0.0);
    assert!((smooth_bump(0.5) - (1.0f64 - 4.0 / 3.0).exp()).abs() < 1e-15);
    let p = InitialParams { amplitude: 1.0, r_v: 1.5, beta: 2.0, mu: 0.5, ..Default::default() };
    let grid = PhaseSpaceGrid::homogeneous(VelocityGrid::new(2.0, 9).unwrap());
    let b = initial_condition("bump", &p, grid).unwrap();
    for (val, v) in b.values.iter().zip(grid.v.nodes()) {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        assert_eq!(*val == 0.0, r >= 1.5);
    }
    let rj = initial_condition("rayleigh_jeans_cutoff", &p, grid).unwrap();
    for (val, v) in rj.values.iter().zip(grid.v.nodes()) {
        let want = 1.0 / (2.0 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) + 0.5);
        assert!((val - want).abs() < 1e-15);
    }
    match initial_condition("maxwellian", &p, grid) {
        Err(KweError::Config { path, .. }) => assert_eq!(path, "initial.name"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn config_defaults_and_values() {
    let cfg = parse_config("", Path::new("/base")).unwrap();
    assert_eq!(cfg.grid.v.n_per_axis(), 9);
    assert_eq!(cfg.grid.x.dim(), 0);
    assert_eq!(cfg.initial_name, "gaussian");
    assert_eq!(cfg.output_dir, Path::new("/base/out"));
    assert!(!cfg.write_snapshots);

    let text = r#"
[grid]
v_max = 5
n_v = 11
dim_x = 1
x_max = 4.0
n_x = 9
n_polar = 4
n_azimuthal = 8

[weights]
M = 10.0
alpha = 4.0
N_moment = 2
epsilon0_budget = 0.5

[solver]
t_end = 2.0
dt = 0.25
snapshot_stride = 2
picard_tol = 1e-10
seed = 99

[initial]
name = "bump"
amplitude = 0.003

[output]
dir = "/abs/out"
snapshots = true
"#;
    let cfg = parse_config(text, Path::new("/base")).unwrap();
    assert_eq!(cfg.grid.v.v_max(), 5.0);
    assert_eq!(cfg.grid.x.len(), 9);
    assert_eq!(cfg.quadrature().unwrap().len(), 32);
    assert_eq!(cfg.solver.weights.m, 10.0);
    assert_eq!(cfg.solver.epsilon0_budget, 0.5);
    assert_eq!(cfg.solver.snapshot_dt(), 0.5);
    assert_eq!(cfg.seed, 99);
    assert_eq!(cfg.initial.amplitude, 0.003);
    assert_eq!(cfg.output_dir, Path::new("/abs/out"));
    assert!(cfg.write_snapshots);
}

#[test]
fn config_errors_name_the_offending_key() {
    assert_eq!(config_error("[grid]\nn_vv = 3\n").0, "grid.n_vv");
    assert_eq!(config_error("[gird]\n").0, "gird");
    assert_eq!(config_error("[grid]\nn_v = 8\n").0, "grid.n_v");
    assert_eq!(config_error("[grid]\nn_v = \"nine\"\n").0, "grid.n_v");
    assert_eq!(config_error("[grid]\nn_azimuthal = 7\n").0, "grid.n_azimuthal");
    assert_eq!(config_error("[solver]\nt_end = 1.05\ndt = 0.1\n").0, "solver.t_end");
    assert_eq!(config_error("[solver]\ndt = 0\n").0, "solver.dt");
    assert_eq!(config_error("[initial]\ns_v = -1\n").0, "initial.s_v");
    assert_eq!(config_error("[output]\nsnapshots = 1\n").0, "output.snapshots");
    let (path, message) = config_error("[weights]\nM = 9\nalpha = 9\n");
    assert_eq!(path, "weights.alpha");
    assert!(message.contains("WeightParams"));
    assert_eq!(config_error("not toml [").0, "<file>");
}

#[test]
fn load_config_resolves_relative_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[output]\ndir = \"results\"\n").unwrap();
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.output_dir, dir.path().join("results"));
    assert!(matches!(load_config(&dir.path().join("missing.toml")), Err(KweError::Config { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_snapshot_round_trips(vals in prop::collection::vec(any::<f64>(), 2 * 27), time in any::<f64>()) {
        let grid = PhaseSpaceGrid::new(SpatialGrid::new(1, 1.0, 2).unwrap(), VelocityGrid::new(0.5, 3).unwrap());
        let f = DistributionField::from_values(grid, vals, time).unwrap();
        let g = decode_snapshot(&encode_snapshot(&f)).unwrap();
        prop_assert_eq!(g.time.to_bits(), f.time.to_bits());
        prop_assert!(f.values.iter().zip(&g.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn csv_numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
