//! Scattering states f±∞, tail ladders, the final-state fixed point and
//! wave-operator Lipschitz probes.

use crate::collision::collision_full;
use crate::diagnostics::{loglog_slope, SlopeFit};
use crate::error::{KweError, Result};
use crate::phase_grid::{weighted_norm, DistributionField, NormKind, SphereQuadrature};
use crate::solver::{duhamel_sum, run, Direction, SolverConfig, Trajectory};
use crate::transport::apply_transport;

#[derive(Clone, Debug)]
pub struct ScatteringReport {
    pub state: DistributionField,
    /// (t₁, ‖∫_{t₁}^{t_end} S(−s)𝒞[f](s) ds‖_{L¹}) for every snapshot t₁ > 0
    pub ladder: Vec<(f64, f64)>,
    /// slope of the ladder over 1 ≤ |t₁| ≤ t_end/2, when at least three points fall there
    pub tail_fit: Option<SlopeFit>,
    /// ‖f(t_end) − S(t_end)f±∞‖_{L¹}
    pub end_defect: f64,
    /// end_defect · |t_end|^{1/2}
    pub end_constant: f64,
}

fn uniform_spacing(traj: &Trajectory) -> Result<f64> {
    let t = traj.times();
    if t.is_empty() || t[0] != 0.0 {
        return Err(KweError::domain("trajectory must start at t = 0"));
    }
    if t.len() == 1 {
        return Ok(0.0);
    }
    let d = t[1] - t[0];
    for w in t.windows(2) {
        if ((w[1] - w[0]) - d).abs() > 1e-9 * d.abs().max(1.0) {
            return Err(KweError::domain(
                "trajectory does not cover its horizon with uniform snapshots",
            ));
        }
    }
    Ok(d.abs())
}

/// D_j = S(−s_j)𝒞[f](s_j) for every snapshot.
fn pulled_back(traj: &Trajectory, q: &SphereQuadrature) -> Vec<DistributionField> {
    traj.snapshots
        .iter()
        .map(|s| apply_transport(&collision_full(s, q), -s.time))
        .collect()
}

/// f₀ + Σ trapezoid of S(−s)𝒞[f](s) (forward), or f₀ − Σ … over negative
/// times (backward trajectories).
pub fn extract_scattering_state(traj: &Trajectory, q: &SphereQuadrature) -> Result<ScatteringReport> {
    let delta = uniform_spacing(traj)?;
    let d = pulled_back(traj, q);
    Ok(assemble(traj, &d, delta, 1.0))
}

/// Same machinery with 𝒞 replaced by `scale`·𝒞 (bookkeeping check).
pub fn extract_with_scaled_collision(
    traj: &Trajectory,
    q: &SphereQuadrature,
    scale: f64,
) -> Result<DistributionField> {
    let delta = uniform_spacing(traj)?;
    let d = pulled_back(traj, q);
    Ok(assemble(traj, &d, delta, scale).state)
}

fn assemble(traj: &Trajectory, d: &[DistributionField], delta: f64, scale: f64) -> ScatteringReport {
    let sign = match traj.direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    } * scale;
    let f0 = traj.first();
    let k = d.len() - 1;
    let grid = f0.grid;
    let zero = DistributionField::zeros(grid);
    let full = if k == 0 {
        zero.clone()
    } else {
        trapezoid(d, 0, k, delta)
    };
    let mut state = f0.axpy(sign, &full);
    state.time = 0.0;

    let mut ladder = Vec::new();
    for m in 1..=k {
        let tail = if m == k { zero.clone() } else { trapezoid(d, m, k, delta) };
        ladder.push((traj.snapshots[m].time, scale.abs() * weighted_norm(&tail, 0.0, NormKind::L1Xv)));
    }
    let t_end = traj.last().time;
    let (ts, vs): (Vec<f64>, Vec<f64>) = ladder
        .iter()
        .filter(|(t, _)| t.abs() >= 1.0 && t.abs() <= 0.5 * t_end.abs())
        .map(|(t, v)| (t.abs(), *v))
        .unzip();
    let tail_fit = if ts.len() >= 3 {
        loglog_slope(&ts, &vs).ok()
    } else {
        None
    };
    let free_end = apply_transport(&state, t_end);
    let end_defect = weighted_norm(&traj.last().axpy(-1.0, &free_end), 0.0, NormKind::L1Xv);
    ScatteringReport {
        state,
        ladder,
        tail_fit,
        end_defect,
        end_constant: end_defect * t_end.abs().sqrt(),
    }
}

fn trapezoid(d: &[DistributionField], lo: usize, hi: usize, delta: f64) -> DistributionField {
    let mut acc = vec![0.0; d[0].values.len()];
    for (j, dj) in d.iter().enumerate().take(hi + 1).skip(lo) {
        let w = crate::solver::trapezoid_weight(j, lo, hi) * delta;
        for (a, b) in acc.iter_mut().zip(&dj.values) {
            *a += w * b;
        }
    }
    DistributionField {
        grid: d[0].grid,
        values: acc,
        time: 0.0,
        nonneg_asserted: false,
    }
}

/// Backward-trajectory extraction of f₋∞.
pub fn extract_scattering_state_backward(
    traj: &Trajectory,
    q: &SphereQuadrature,
) -> Result<ScatteringReport> {
    if traj.direction != Direction::Backward {
        return Err(KweError::domain("expected a trajectory from run_backward"));
    }
    let delta = uniform_spacing(traj)?;
    let d = pulled_back(traj, q);
    Ok(assemble(traj, &d, delta, 1.0))
}

#[derive(Clone, Debug)]
pub struct FinalStateReport {
    pub f0: DistributionField,
    pub trajectory: Trajectory,
    pub increments: Vec<f64>,
    pub ratios: Vec<f64>,
    pub iterations: usize,
    /// ‖∫_{t_max/2}^{t_max} S(−s)𝒞[f] ds‖_{L¹}, used as the size of the neglected tail
    pub tail_bound: f64,
}

/// Fixed point of f(t) = S(t)f₊∞ − ∫ₜ^{t_max} S(t−s)𝒞[f](s) ds on the snapshot
/// grid, returning f(0).
pub fn solve_final_state(
    f_plus_inf: &DistributionField,
    t_max: f64,
    cfg: &SolverConfig,
    q: &SphereQuadrature,
) -> Result<FinalStateReport> {
    cfg.validate()?;
    let delta = cfg.snapshot_dt();
    let k_max = (t_max / delta).round() as usize;
    if ((k_max as f64) * delta - t_max).abs() > 1e-9 * t_max.max(1.0) {
        return Err(KweError::config(
            "solver.dt",
            "t_max must be a whole number of snapshot intervals",
        ));
    }
    let times: Vec<f64> = (0..=k_max).map(|k| k as f64 * delta).collect();
    let base = f_plus_inf.clone().with_time(0.0);
    let free: Vec<DistributionField> = times.iter().map(|&t| apply_transport(&base, t)).collect();
    let mut current = free.clone();
    let mut increments: Vec<f64> = Vec::new();
    let mut ratios = Vec::new();
    let mut above_one = 0;
    for iter in 1..=cfg.picard_max_iter {
        let c: Vec<DistributionField> = current.iter().map(|f| collision_full(f, q)).collect();
        let next: Vec<DistributionField> = (0..=k_max)
            .map(|k| {
                let d = duhamel_sum(&c, &times, times[k], k, k_max, delta);
                let mut out = free[k].axpy(-1.0, &d);
                out.time = times[k];
                out
            })
            .collect();
        for f in &next {
            f.check_finite()?;
        }
        let inc = next
            .iter()
            .zip(&current)
            .map(|(a, b)| weighted_norm(&a.axpy(-1.0, b), cfg.weights.m, NormKind::LinfXv))
            .fold(0.0, f64::max);
        if let Some(&prev) = increments.last() {
            let r = if prev > 0.0 { inc / prev } else { 0.0 };
            ratios.push(r);
            above_one = if r >= 1.0 { above_one + 1 } else { 0 };
        }
        increments.push(inc);
        current = next;
        if inc < cfg.picard_tol {
            let traj = Trajectory::from_snapshots(current, Direction::Forward);
            let tail_bound = {
                let d = pulled_back(&traj, q);
                let lo = k_max / 2;
                if lo < k_max {
                    weighted_norm(&trapezoid(&d, lo, k_max, delta), 0.0, NormKind::L1Xv)
                } else {
                    0.0
                }
            };
            return Ok(FinalStateReport {
                f0: traj.snapshots[0].clone(),
                trajectory: traj,
                increments,
                ratios,
                iterations: iter,
                tail_bound,
            });
        }
        if above_one >= 3 {
            return Err(KweError::property(format!(
                "final-state iteration is not contracting (ratios {ratios:?}); smallness violated, ‖f+inf‖_L1 = {:.3e}",
                weighted_norm(f_plus_inf, 0.0, NormKind::L1Xv)
            )));
        }
    }
    Err(KweError::property(format!(
        "final-state iteration did not reach tolerance {} in {} sweeps",
        cfg.picard_tol, cfg.picard_max_iter
    )))
}

/// ‖U₊f₀ − U₊g₀‖_{L¹} / ‖f₀ − g₀‖_{L¹} from two forward runs.
pub fn wave_operator_lipschitz_probe(
    f0: &DistributionField,
    g0: &DistributionField,
    cfg: &SolverConfig,
    q: &SphereQuadrature,
) -> Result<f64> {
    f0.same_grid(g0)?;
    let denom = weighted_norm(&f0.axpy(-1.0, g0), 0.0, NormKind::L1Xv);
    if denom == 0.0 {
        return Err(KweError::domain("Lipschitz ratio undefined for identical data"));
    }
    let a = extract_scattering_state(&run(f0, cfg, q)?, q)?.state;
    let b = extract_scattering_state(&run(g0, cfg, q)?, q)?.state;
    Ok(weighted_norm(&a.axpy(-1.0, &b), 0.0, NormKind::L1Xv) / denom)
}

/// (Pf)(x, v) = f(−x, −v).
pub fn parity(f: &DistributionField) -> DistributionField {
    let nx = f.grid.x.len();
    let nv = f.grid.v.len();
    let mut values = vec![0.0; f.values.len()];
    for ix in 0..nx {
        for iv in 0..nv {
            values[(nx - 1 - ix) * nv + (nv - 1 - iv)] = f.values[ix * nv + iv];
        }
    }
    DistributionField {
        values,
        ..f.clone()
    }
}
