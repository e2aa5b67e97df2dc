//! Kaniel–Shinbrot monotone iteration.
//!
//! Lower and upper trajectories are updated by the integrating-factor forms
//!
//! ```text
//! l_{n+1}(t) = S(t)f₀·D_u(0,t) + ∫₀ᵗ S(t−s)𝒢[l_n](s)·D_u(s,t) ds
//! u_{n+1}(t) = S(t)f₀·D_l(0,t) + ∫₀ᵗ S(t−s)𝒢[u_n](s)·D_l(s,t) ds
//! ```
//!
//! with D_g(s,t) = exp(−∫ₛᵗ S(t−τ)ℛ[g_n,g_n](τ) dτ), all integrals by the
//! composite trapezoid rule on the snapshot grid. Starting from l₀ = 0 and
//! u₀ = the gain-only solution, the iterates nest l_n ≤ l_{n+1} ≤ u_{n+1} ≤ u_n.

use rayon::prelude::*;

use crate::collision::collision_parts;
use crate::error::{KweError, Result};
use crate::phase_grid::{weighted_norm, DistributionField, NormKind, SphereQuadrature};
use crate::solver::{gain_only_solve, run, trapezoid_weight, Direction, SolverConfig, Trajectory};
use crate::transport::apply_transport;

#[derive(Clone, Debug)]
pub struct KsState {
    pub f0: DistributionField,
    pub lower: Vec<DistributionField>,
    pub upper: Vec<DistributionField>,
    pub times: Vec<f64>,
    pub n: usize,
    /// ‖u_k − l_k‖_{L¹} at t_end for k = 0..=n
    pub gap_history: Vec<f64>,
    /// largest raw nesting violation seen at each update, before clipping
    pub violation_history: Vec<f64>,
}

impl KsState {
    pub fn gap(&self) -> f64 {
        *self.gap_history.last().unwrap_or(&0.0)
    }

    /// Successive gap ratios.
    pub fn gap_ratios(&self) -> Vec<f64> {
        self.gap_history
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }

    pub fn lower_trajectory(&self) -> Trajectory {
        to_trajectory(&self.lower)
    }

    pub fn upper_trajectory(&self) -> Trajectory {
        to_trajectory(&self.upper)
    }
}

fn to_trajectory(snaps: &[DistributionField]) -> Trajectory {
    Trajectory::from_snapshots(snaps.to_vec(), Direction::Forward)
}

fn gap_at_end(lower: &[DistributionField], upper: &[DistributionField]) -> f64 {
    let l = lower.last().expect("non-empty");
    let u = upper.last().expect("non-empty");
    weighted_norm(&u.axpy(-1.0, l), 0.0, NormKind::L1Xv)
}

/// max(a − b) over all snapshots and nodes (positive when a ≤ b fails).
fn excess(a: &[DistributionField], b: &[DistributionField]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.values.iter().zip(&y.values).map(|(p, q)| p - q))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// One integrating-factor update driven by `gain` and damped by `freq`.
fn update(
    f0: &DistributionField,
    times: &[f64],
    gain: &[DistributionField],
    freq: &[DistributionField],
) -> Vec<DistributionField> {
    let delta = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    (0..times.len())
        .into_par_iter()
        .map(|k| {
            let tk = times[k];
            let moved_r: Vec<DistributionField> =
                (0..=k).map(|m| apply_transport(&freq[m], tk - times[m])).collect();
            let n = f0.grid.len();
            // exponent E(j, k) accumulated backwards from j = k
            let mut expo = vec![0.0; n];
            let mut acc = vec![0.0; n];
            for j in (0..=k).rev() {
                if j < k {
                    for (e, (a, b)) in expo
                        .iter_mut()
                        .zip(moved_r[j].values.iter().zip(&moved_r[j + 1].values))
                    {
                        *e += 0.5 * delta * (a + b);
                    }
                }
                let w = trapezoid_weight(j, 0, k) * delta;
                if w != 0.0 && !gain[j].is_zero() {
                    let g = apply_transport(&gain[j], tk - times[j]);
                    for ((a, gv), e) in acc.iter_mut().zip(&g.values).zip(&expo) {
                        *a += w * gv * (-e).exp();
                    }
                }
            }
            let free = apply_transport(f0, tk);
            let values = free
                .values
                .iter()
                .zip(&acc)
                .zip(&expo)
                .map(|((s, a), e)| s * (-e).exp() + a)
                .collect();
            DistributionField {
                grid: f0.grid,
                values,
                time: tk,
                nonneg_asserted: true,
            }
        })
        .collect()
}

/// l₀ = 0, u₀ = gain-only solution on the snapshot grid of [0, t_end].
pub fn ks_initialize(
    f0: &DistributionField,
    cfg: &SolverConfig,
    q: &SphereQuadrature,
) -> Result<KsState> {
    if f0.min_value() < 0.0 {
        return Err(KweError::domain("Kaniel-Shinbrot needs f0 >= 0"));
    }
    let gain_only = gain_only_solve(f0, cfg, q)?;
    let upper = gain_only.trajectory.snapshots;
    let times: Vec<f64> = upper.iter().map(|s| s.time).collect();
    let lower: Vec<DistributionField> = upper
        .iter()
        .map(|s| {
            let mut z = DistributionField::zeros(s.grid).with_time(s.time);
            z.nonneg_asserted = true;
            z
        })
        .collect();
    let gap = gap_at_end(&lower, &upper);
    Ok(KsState {
        f0: f0.clone().with_time(0.0),
        lower,
        upper,
        times,
        n: 0,
        gap_history: vec![gap],
        violation_history: Vec::new(),
    })
}

/// Violations of 0 ≤ l₀ ≤ l₁ ≤ u₁ ≤ u₀ between two consecutive states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NestingCheck {
    pub lower_decrease: f64,
    pub crossing: f64,
    pub upper_increase: f64,
    pub negative_lower: f64,
}

impl NestingCheck {
    pub fn worst(&self) -> f64 {
        self.lower_decrease
            .max(self.crossing)
            .max(self.upper_increase)
            .max(self.negative_lower)
            .max(0.0)
    }
}

pub fn nesting(prev: &KsState, next: &KsState) -> NestingCheck {
    let neg = next
        .lower
        .iter()
        .map(|s| -s.min_value())
        .fold(f64::NEG_INFINITY, f64::max);
    NestingCheck {
        lower_decrease: excess(&prev.lower, &next.lower),
        crossing: excess(&next.lower, &next.upper),
        upper_increase: excess(&next.upper, &prev.upper),
        negative_lower: neg,
    }
}

fn clip(a: &mut [DistributionField], b: &[DistributionField], keep_max: bool) {
    for (x, y) in a.iter_mut().zip(b) {
        for (p, q) in x.values.iter_mut().zip(&y.values) {
            *p = if keep_max { p.max(*q) } else { p.min(*q) };
        }
    }
}

/// One n → n+1 update of both trajectories.
pub fn ks_iterate(state: &KsState, cfg: &SolverConfig, q: &SphereQuadrature) -> Result<KsState> {
    let lower_parts: Vec<_> = state
        .lower
        .iter()
        .map(|s| collision_parts(s, q, cfg.reduce))
        .collect();
    let upper_parts: Vec<_> = state
        .upper
        .iter()
        .map(|s| collision_parts(s, q, cfg.reduce))
        .collect();
    let g_l: Vec<_> = lower_parts.iter().map(|p| p.gain.clone()).collect();
    let r_l: Vec<_> = lower_parts.iter().map(|p| p.frequency.clone()).collect();
    let g_u: Vec<_> = upper_parts.iter().map(|p| p.gain.clone()).collect();
    let r_u: Vec<_> = upper_parts.iter().map(|p| p.frequency.clone()).collect();

    let lower = update(&state.f0, &state.times, &g_l, &r_u);
    let upper = update(&state.f0, &state.times, &g_u, &r_l);
    let mut next = KsState {
        f0: state.f0.clone(),
        lower,
        upper,
        times: state.times.clone(),
        n: state.n + 1,
        gap_history: state.gap_history.clone(),
        violation_history: state.violation_history.clone(),
    };
    let check = nesting(state, &next);
    let worst = check.worst();
    let scale = state.f0.max_abs().max(f64::MIN_POSITIVE);
    if worst > cfg.ks_nesting_tol * scale {
        return Err(KweError::property(format!(
            "Kaniel-Shinbrot nesting violated at iterate {}: {check:?}",
            next.n
        )));
    }
    clip(&mut next.lower, &state.lower, true);
    clip(&mut next.upper, &state.upper, false);
    next.violation_history.push(worst);
    next.gap_history.push(gap_at_end(&next.lower, &next.upper));
    Ok(next)
}

/// Result of [`ks_converge`].
#[derive(Clone, Debug)]
pub struct KsCertificate {
    pub state: KsState,
    pub iterations: usize,
    pub converged: bool,
    pub max_nesting_violation: f64,
    pub final_min: f64,
    /// max over snapshots of max(l − f, f − u) against the Strang trajectory
    pub sandwich_violation: f64,
    /// sup_t ‖(l+u)/2 − f‖_{L¹} / ‖f₀‖_{L¹}
    pub strang_rel_l1: f64,
    pub strang: Trajectory,
}

pub fn ks_converge(
    f0: &DistributionField,
    cfg: &SolverConfig,
    q: &SphereQuadrature,
) -> Result<KsCertificate> {
    let mut state = ks_initialize(f0, cfg, q)?;
    let norm0 = weighted_norm(f0, 0.0, NormKind::L1Xv);
    let target = cfg.ks_tol * norm0;
    let mut converged = state.gap() <= target;
    while !converged && state.n < cfg.ks_max_iter {
        state = ks_iterate(&state, cfg, q)?;
        converged = state.gap() <= target;
    }
    let mut strang_cfg = cfg.clone();
    strang_cfg.gain_only = false;
    let strang = run(f0, &strang_cfg, q)?;
    let mut sandwich: f64 = 0.0;
    let mut rel: f64 = 0.0;
    for s in &strang.snapshots {
        let k = state
            .times
            .iter()
            .position(|t| (t - s.time).abs() < 1e-9 * (1.0 + t.abs()))
            .ok_or_else(|| KweError::domain("Strang and Kaniel-Shinbrot snapshot grids differ"))?;
        let (l, u) = (&state.lower[k], &state.upper[k]);
        for ((a, b), c) in l.values.iter().zip(&s.values).zip(&u.values) {
            sandwich = sandwich.max(a - b).max(b - c);
        }
        let mid = l.axpy(1.0, u).scaled(0.5);
        let d = weighted_norm(&mid.axpy(-1.0, s), 0.0, NormKind::L1Xv);
        if norm0 > 0.0 {
            rel = rel.max(d / norm0);
        }
    }
    let final_min = state
        .lower
        .iter()
        .map(|s| s.min_value())
        .fold(f64::INFINITY, f64::min);
    Ok(KsCertificate {
        iterations: state.n,
        converged,
        max_nesting_violation: state.violation_history.iter().copied().fold(0.0, f64::max),
        final_min,
        sandwich_violation: sandwich,
        strang_rel_l1: rel,
        strang,
        state,
    })
}
