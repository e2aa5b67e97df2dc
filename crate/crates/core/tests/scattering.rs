use kwe::phase_grid::{dot, weighted_norm, NormKind};
use kwe::scattering::{
    extract_scattering_state, extract_scattering_state_backward, extract_with_scaled_collision, parity,
    solve_final_state, wave_operator_lipschitz_probe,
};
use kwe::solver::{run, run_backward, Direction, SolverConfig, Trajectory};
use kwe::transport::apply_transport;
use kwe::{DistributionField, KweError, PhaseSpaceGrid, SpatialGrid, SphereQuadrature, VelocityGrid};
use proptest::prelude::*;

// dx = h_v·dt/2, so Strang half-steps and pull-backs all shift by whole cells
fn grid() -> PhaseSpaceGrid {
    PhaseSpaceGrid::new(SpatialGrid::new(1, 6.0, 65).unwrap(), VelocityGrid::new(1.5, 3).unwrap())
}

fn quad() -> SphereQuadrature {
    SphereQuadrature::new(2, 4).unwrap()
}

fn data(a: f64, shift: f64) -> DistributionField {
    DistributionField::from_fn(grid(), |x, v| {
        let w = [v[0] - shift, v[1], v[2]];
        a * (-dot(w, w) / 2.0).exp() * (-(x[0] - shift) * (x[0] - shift) / 2.0).exp()
    })
}

fn cfg() -> SolverConfig {
    SolverConfig {
        t_end: 2.0,
        dt: 0.25,
        boundary_budget: 1.0,
        picard_tol: 1e-14,
        ..Default::default()
    }
}

fn l1(f: &DistributionField) -> f64 {
    weighted_norm(f, 0.0, NormKind::L1Xv)
}

#[test]
fn free_data_is_its_own_scattering_state() {
    // S(t)f₀ snapshots with the collision switched off
    let f0 = data(0.1, 0.0);
    let traj = run(&f0, &cfg(), &quad()).unwrap();
    let off = extract_with_scaled_collision(&traj, &quad(), 0.0).unwrap();
    assert_eq!(off.values, f0.values);
}

#[test]
fn extraction_is_affine_in_the_collision_scale() {
    let f0 = data(0.05, 0.0);
    let traj = run(&f0, &cfg(), &quad()).unwrap();
    let one = extract_scattering_state(&traj, &quad()).unwrap().state;
    let two = extract_with_scaled_collision(&traj, &quad(), 2.0).unwrap();
    let d1 = one.axpy(-1.0, &f0);
    let d2 = two.axpy(-1.0, &f0);
    assert!(l1(&d1) > 0.0);
    assert!(l1(&d2.axpy(-2.0, &d1)) <= 1e-14 * l1(&d2));
}

#[test]
fn ladder_is_decreasing_and_ends_at_zero() {
    let f0 = data(0.05, 0.0);
    let traj = run(&f0, &cfg(), &quad()).unwrap();
    let rep = extract_scattering_state(&traj, &quad()).unwrap();
    assert_eq!(rep.ladder.len(), traj.snapshots.len() - 1);
    assert_eq!(rep.ladder.last().unwrap().1, 0.0);
    assert!(rep.end_defect > 0.0);
    assert!((rep.end_constant - rep.end_defect * 2f64.sqrt()).abs() < 1e-15);
    // with the horizon at t_end the defect is pure quadrature error of the Duhamel integral
    assert!(rep.end_defect < 1e-3 * l1(&f0), "{:.3e}", rep.end_defect / l1(&f0));
}

#[test]
fn backward_extraction_needs_a_backward_trajectory() {
    let f0 = data(0.05, 0.0);
    let fwd = run(&f0, &cfg(), &quad()).unwrap();
    assert!(matches!(extract_scattering_state_backward(&fwd, &quad()), Err(KweError::Domain(_))));
    let back = run_backward(&f0, &cfg(), &quad()).unwrap();
    assert_eq!(back.direction, Direction::Backward);
    let rep = extract_scattering_state_backward(&back, &quad()).unwrap();
    assert_eq!(rep.state.time, 0.0);
}

#[test]
fn parity_invariant_data_has_parity_invariant_states() {
    let f0 = data(0.05, 0.0);
    assert_eq!(parity(&f0).values, f0.values);
    let fwd = extract_scattering_state(&run(&f0, &cfg(), &quad()).unwrap(), &quad()).unwrap().state;
    let back = extract_scattering_state_backward(&run_backward(&f0, &cfg(), &quad()).unwrap(), &quad())
        .unwrap()
        .state;
    for s in [&fwd, &back] {
        let p = parity(s);
        assert!(l1(&p.axpy(-1.0, s)) <= 1e-13 * l1(s));
    }
}

#[test]
fn non_uniform_snapshots_are_rejected() {
    let f0 = data(0.1, 0.0);
    let snaps = vec![f0.clone(), apply_transport(&f0, 0.5), apply_transport(&f0, 1.5)];
    let traj = Trajectory::from_snapshots(snaps, Direction::Forward);
    assert!(extract_scattering_state(&traj, &quad()).is_err());
    let late = Trajectory::from_snapshots(vec![apply_transport(&f0, 1.0)], Direction::Forward);
    assert!(extract_scattering_state(&late, &quad()).is_err());
}

#[test]
fn final_state_round_trip() {
    let f0 = data(0.05, 0.0);
    let c = cfg();
    let g = extract_scattering_state(&run(&f0, &c, &quad()).unwrap(), &quad()).unwrap().state;
    let fin = solve_final_state(&g, c.t_end, &c, &quad()).unwrap();
    assert!(fin.ratios.iter().all(|r| *r < 0.5));
    let again = extract_scattering_state(&run(&fin.f0, &c, &quad()).unwrap(), &quad()).unwrap().state;
    let err = l1(&again.axpy(-1.0, &g));
    assert!(err <= 1e-3 * l1(&g) + fin.tail_bound, "{err:.3e} vs {:.3e}", fin.tail_bound);
    assert!(solve_final_state(&g, 1.1, &c, &quad()).is_err());
}

#[test]
fn lipschitz_probe_rejects_identical_data() {
    let f0 = data(0.1, 0.0);
    assert!(wave_operator_lipschitz_probe(&f0, &f0, &cfg(), &quad()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn parity_is_an_involution(vals in prop::collection::vec(-1.0f64..1.0, 65 * 27)) {
        let f = DistributionField::from_values(grid(), vals, 0.0).unwrap();
        prop_assert_eq!(parity(&parity(&f)).values, f.values);
    }

    #[test]
    fn small_data_lipschitz_ratio_is_near_one(shift in -0.5f64..0.5, eps in 0.01f64..0.2) {
        let f0 = data(0.1, 0.0);
        let g0 = data(0.1 * (1.0 + eps), shift);
        let r = wave_operator_lipschitz_probe(&f0, &g0, &cfg(), &quad()).unwrap();
        prop_assert!(r > 0.5 && r < 2.1, "ratio {}", r);
    }
}
