use kwe::collision::collision_full;
use kwe::diagnostics::{decay_fit, report, trajectory_reports, x_norm_proxy, ReportField};
use kwe::phase_grid::{dot, weighted_norm, NormKind};
use kwe::solver::{gain_only_solve, picard_solve, run, run_backward, step_strang, Direction, SolverConfig};
use kwe::{DistributionField, KweError, PhaseSpaceGrid, SpatialGrid, SphereQuadrature, VelocityGrid, WeightParams};

fn tiny() -> (PhaseSpaceGrid, SphereQuadrature) {
    (
        PhaseSpaceGrid::homogeneous(VelocityGrid::new(3.0, 5).unwrap()),
        SphereQuadrature::new(2, 4).unwrap(),
    )
}

fn gaussian(grid: PhaseSpaceGrid, a: f64) -> DistributionField {
    DistributionField::from_fn(grid, |x, v| {
        let w = [v[0] - 0.4, v[1], v[2] + 0.2];
        a * (-dot(w, w) / 2.0).exp() * (-dot(x, x) / 4.0).exp()
    })
}

fn cfg(t_end: f64, dt: f64) -> SolverConfig {
    SolverConfig {
        t_end,
        dt,
        picard_horizon: t_end.max(3.0),
        ..Default::default()
    }
}

#[test]
fn vacuum_stays_vacuum() {
    let (grid, q) = tiny();
    let f0 = DistributionField::zeros(grid);
    let traj = run(&f0, &cfg(1.0, 0.25), &q).unwrap();
    assert_eq!(traj.snapshots.len(), 5);
    assert!(traj.snapshots.iter().all(|s| s.is_zero()));
}

#[test]
fn snapshot_grid_follows_stride() {
    let (grid, q) = tiny();
    let f0 = gaussian(grid, 0.01);
    let c = SolverConfig { snapshot_stride: 3, ..cfg(1.0, 0.125) };
    let traj = run(&f0, &c, &q).unwrap();
    let t = traj.times();
    // 8 steps: snapshots at 0, 3, 6 and the final step
    assert_eq!(t, vec![0.0, 0.375, 0.75, 1.0]);
    assert_eq!(traj.direction, Direction::Forward);
    assert_eq!(traj.boundary_history.len(), 4);
}

#[test]
fn invalid_solver_settings_are_config_errors() {
    let (grid, q) = tiny();
    let f0 = gaussian(grid, 0.01);
    for c in [cfg(1.0, 0.3), cfg(1.0, 0.0), SolverConfig { snapshot_stride: 0, ..cfg(1.0, 0.5) }] {
        assert!(matches!(run(&f0, &c, &q), Err(KweError::Config { .. })));
    }
    let c = SolverConfig { picard_horizon: 1.0, ..cfg(2.0, 0.5) };
    assert!(matches!(picard_solve(&f0, 2.0, &c, &q), Err(KweError::Domain(_))));
}

#[test]
fn homogeneous_step_is_explicit_midpoint() {
    let (grid, q) = tiny();
    let f0 = gaussian(grid, 0.2);
    let dt = 0.05;
    let k1 = collision_full(&f0, &q);
    let mid = f0.axpy(0.5 * dt, &k1);
    let want = f0.axpy(dt, &collision_full(&mid, &q));
    let got = step_strang(&f0, dt, &q, false).unwrap();
    assert_eq!(got.values, want.values);
    assert_eq!(got.time, dt);
}

#[test]
fn strang_is_second_order() {
    // half-step shifts are whole cells for every dt used, so only the splitting error remains
    let hx = 1.5 / 64.0;
    let grid = PhaseSpaceGrid::new(SpatialGrid::new(1, 128.0 * hx, 257).unwrap(), VelocityGrid::new(1.5, 3).unwrap());
    let q = SphereQuadrature::new(2, 4).unwrap();
    let f0 = gaussian(grid, 0.05);
    let c = |dt| SolverConfig { boundary_budget: 1.0, ..cfg(1.0, dt) };
    let reference = run(&f0, &c(1.0 / 32.0), &q).unwrap();
    let err = |dt: f64| {
        let t = run(&f0, &c(dt), &q).unwrap();
        weighted_norm(&t.last().axpy(-1.0, reference.last()), 0.0, NormKind::L1Xv)
    };
    let (e1, e2, e3) = (err(0.25), err(0.125), err(1.0 / 16.0));
    let (r1, r2) = (e1 / e2, e2 / e3);
    assert!(r1 > 3.0 && r2 > 3.0, "errors {e1:.3e} {e2:.3e} {e3:.3e}");
}

#[test]
fn backward_then_forward_returns_to_the_start() {
    let (grid, q) = tiny();
    let f0 = gaussian(grid, 0.05);
    let err = |dt: f64| {
        let back = run_backward(&f0, &cfg(1.0, dt), &q).unwrap();
        assert_eq!(back.direction, Direction::Backward);
        assert_eq!(back.last().time, -1.0);
        let fwd = run(&back.last().clone().with_time(0.0), &cfg(1.0, dt), &q).unwrap();
        weighted_norm(&fwd.last().axpy(-1.0, &f0), 0.0, NormKind::L1Xv)
    };
    let (a, b) = (err(0.25), err(0.125));
    assert!(b < a / 3.0, "{a:.3e} {b:.3e}");
    assert!(b < 1e-6 * weighted_norm(&f0, 0.0, NormKind::L1Xv));
}

#[test]
fn picard_agrees_with_strang_at_second_order() {
    let (grid, q) = tiny();
    let f0 = gaussian(grid, 0.05);
    let diff = |dt: f64| {
        let c = cfg(2.0, dt);
        let p = picard_solve(&f0, 2.0, &c, &q).unwrap();
        assert!(p.max_ratio() < 0.5);
        let s = run(&f0, &c, &q).unwrap();
        p.trajectory
            .snapshots
            .iter()
            .zip(&s.snapshots)
            .map(|(a, b)| weighted_norm(&a.axpy(-1.0, b), 9.0, NormKind::LinfXv))
            .fold(0.0, f64::max)
    };
    let (a, b) = (diff(0.2), diff(0.1));
    assert!(b <= a / 2.0, "{a:.3e} {b:.3e}");
}

#[test]
fn picard_rejects_large_data() {
    let (grid, q) = tiny();
    let f0 = gaussian(grid, 500.0);
    let err = picard_solve(&f0, 2.0, &cfg(2.0, 0.5), &q).unwrap_err();
    assert!(matches!(err, KweError::Property(_) | KweError::Instability { .. } | KweError::Domain(_)), "{err}");
}

#[test]
fn gain_only_solution_dominates_the_full_one() {
    let (grid, q) = tiny();
    let f0 = gaussian(grid, 0.05);
    let c = cfg(1.0, 0.125);
    let up = gain_only_solve(&f0, &c, &q).unwrap();
    let full = picard_solve(&f0, 1.0, &c, &q).unwrap();
    for (u, f) in up.trajectory.snapshots.iter().zip(&full.trajectory.snapshots) {
        assert!(u.min_value() >= 0.0);
        for (a, b) in u.values.iter().zip(&f.values) {
            assert!(a >= b, "{a} < {b}");
        }
    }
    let neg = f0.scaled(-1.0);
    assert!(gain_only_solve(&neg, &c, &q).is_err());
}

#[test]
fn boundary_budget_is_enforced() {
    let grid = PhaseSpaceGrid::new(SpatialGrid::new(1, 2.0, 5).unwrap(), VelocityGrid::new(3.0, 5).unwrap());
    let q = SphereQuadrature::new(2, 4).unwrap();
    let f0 = gaussian(grid, 0.01);
    match run(&f0, &cfg(2.0, 0.5), &q) {
        Err(e @ KweError::Instability { .. }) => assert_eq!(e.exit_code(), 3),
        other => panic!("{other:?}"),
    }
    let lax = SolverConfig { boundary_budget: 1.0, ..cfg(2.0, 0.5) };
    let traj = run(&f0, &lax, &q).unwrap();
    assert!(traj.boundary_history.windows(2).all(|w| w[1] >= w[0]));
    let rows = trajectory_reports(&traj, &lax.weights);
    assert_eq!(rows.last().unwrap().boundary_mass_lost, traj.boundary_mass_lost);
    assert!(traj.boundary_mass_lost > 0.0);
}

#[test]
fn report_matches_gaussian_moments() {
    let grid = PhaseSpaceGrid::homogeneous(VelocityGrid::new(8.0, 33).unwrap());
    let a = 0.25;
    let f = DistributionField::from_fn(grid, |_, v| a * (-dot(v, v) / 2.0).exp());
    let r = report(&f, &WeightParams::default());
    let m = a * (2.0 * std::f64::consts::PI).powf(1.5);
    assert!((r.mass / m - 1.0).abs() < 1e-12);
    assert!((r.energy / (3.0 * m) - 1.0).abs() < 1e-12);
    assert!(r.momentum.iter().all(|p| p.abs() < 1e-14));
    // ∫⟨v⟩² = m + energy
    assert!((r.moment_n / (4.0 * m) - 1.0).abs() < 1e-12);
    let sup = grid
        .v
        .nodes()
        .into_iter()
        .map(|v| a * (-dot(v, v) / 2.0).exp() * (1.0 + dot(v, v)).powf(4.5))
        .fold(0.0, f64::max);
    assert!((r.linf_m_xv / sup - 1.0).abs() < 1e-14);
    assert!(r.min_value > 0.0);
}

#[test]
fn x_norm_proxy_and_decay_fit() {
    let grid = PhaseSpaceGrid::new(SpatialGrid::new(1, 16.0, 33).unwrap(), VelocityGrid::new(2.0, 5).unwrap());
    let f0 = gaussian(grid, 0.01);
    let w = WeightParams::default();
    let p = x_norm_proxy(&f0, &w, &[1.0, 2.0]);
    assert_eq!(p.l1, weighted_norm(&f0, 0.0, NormKind::L1Xv));
    assert!(p.weighted_l2x_l1v >= weighted_norm(&f0, 1.0, NormKind::L2xL1v));
    assert!(p.max() <= p.total());

    let traj = kwe::solver::Trajectory::from_snapshots(
        (0..=8)
            .map(|k| kwe::transport::apply_transport(&f0, k as f64 * 0.5))
            .collect(),
        Direction::Forward,
    );
    // mass is conserved by free transport while nothing leaves
    let fit = decay_fit(&traj, &w, ReportField::L1Xv, 1.0).unwrap();
    assert!(fit.slope.abs() < 1e-10);
    assert!(decay_fit(&traj, &w, ReportField::L1Xv, 3.5).is_err());
}
