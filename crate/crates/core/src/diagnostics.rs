//! Per-snapshot norm reports and log-log decay regressions.

use crate::error::{KweError, Result};
use crate::phase_grid::{dot, weighted_norm, DistributionField, NormKind, WeightParams};
use crate::solver::Trajectory;

/// X_{M,α} ingredient norms, conserved quantities and extremes at one time.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NormReport {
    pub time: f64,
    pub l1_xv: f64,
    pub linf_m_xv: f64,
    pub linfx_l2v_alpha: f64,
    pub l2x_l1v_w: f64,
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
    pub moment_n: f64,
    pub min_value: f64,
    pub boundary_mass_lost: f64,
}

pub fn report(f: &DistributionField, w: &WeightParams) -> NormReport {
    let grid = f.grid;
    let nodes = grid.v.nodes();
    let measure = grid.cell_measure();
    let mut mass = 0.0;
    let mut mom = [0.0; 3];
    let mut energy = 0.0;
    for ix in 0..grid.x.len() {
        for (val, v) in f.slice(ix).iter().zip(&nodes) {
            mass += val;
            mom[0] += val * v[0];
            mom[1] += val * v[1];
            mom[2] += val * v[2];
            energy += val * dot(*v, *v);
        }
    }
    let min_value = if f.values.is_empty() { 0.0 } else { f.min_value() };
    NormReport {
        time: f.time,
        l1_xv: weighted_norm(f, 0.0, NormKind::L1Xv),
        linf_m_xv: weighted_norm(f, w.m, NormKind::LinfXv),
        linfx_l2v_alpha: weighted_norm(f, w.alpha, NormKind::LinfxL2v),
        l2x_l1v_w: weighted_norm(f, 1.0, NormKind::L2xL1v),
        mass: mass * measure,
        momentum: [mom[0] * measure, mom[1] * measure, mom[2] * measure],
        energy: energy * measure,
        moment_n: weighted_norm(f, w.n_moment, NormKind::L1Xv),
        min_value,
        boundary_mass_lost: 0.0,
    }
}

/// Which report column a regression runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportField {
    L1Xv,
    LinfMXv,
    LinfxL2vAlpha,
    L2xL1vW,
    MomentN,
}

impl ReportField {
    pub fn get(self, r: &NormReport) -> f64 {
        match self {
            ReportField::L1Xv => r.l1_xv,
            ReportField::LinfMXv => r.linf_m_xv,
            ReportField::LinfxL2vAlpha => r.linfx_l2v_alpha,
            ReportField::L2xL1vW => r.l2x_l1v_w,
            ReportField::MomentN => r.moment_n,
        }
    }
}

/// Least-squares fit of log(value) against log(t).
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// root-mean-square residual in log space
    pub residual: f64,
    /// times dropped because the value was zero or not finite
    pub excluded: Vec<f64>,
}

pub fn loglog_slope(times: &[f64], values: &[f64]) -> Result<SlopeFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t > 0.0 && v > 0.0 && v.is_finite() {
            xs.push(t.ln());
            ys.push(v.ln());
        } else {
            excluded.push(t);
        }
    }
    if xs.len() < 2 {
        return Err(KweError::domain(format!(
            "log-log fit needs two positive points, excluded times {excluded:?}"
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(KweError::domain("log-log fit needs distinct times"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        residual,
        excluded,
    })
}

/// Decay slope of one report column over snapshots with t ≥ t_min.
pub fn decay_fit(
    traj: &Trajectory,
    w: &WeightParams,
    which: ReportField,
    t_min: f64,
) -> Result<SlopeFit> {
    let (times, values): (Vec<f64>, Vec<f64>) = traj
        .snapshots
        .iter()
        .filter(|s| s.time.abs() >= t_min)
        .map(|s| (s.time.abs(), which.get(&report(s, w))))
        .unzip();
    if times.len() < 5 {
        return Err(KweError::domain(format!(
            "decay_fit needs >= 5 snapshots with t >= {t_min}, got {}",
            times.len()
        )));
    }
    loglog_slope(&times, &values)
}

/// Largest value over the run of each X-ingredient, the time-weighted ones
/// carrying their ⟨t⟩^{3/2} factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XNormProxy {
    pub linf_m: f64,
    pub l1: f64,
    pub weighted_linfx_l2v: f64,
    pub weighted_l2x_l1v: f64,
}

impl XNormProxy {
    pub fn max(&self) -> f64 {
        self.linf_m
            .max(self.l1)
            .max(self.weighted_linfx_l2v)
            .max(self.weighted_l2x_l1v)
    }

    pub fn total(&self) -> f64 {
        self.linf_m + self.l1 + self.weighted_linfx_l2v + self.weighted_l2x_l1v
    }
}

/// X_{M,α} ingredients of f₀ with the sup over t sampled at `times`.
pub fn x_norm_proxy(f0: &DistributionField, w: &WeightParams, times: &[f64]) -> XNormProxy {
    let mut p = XNormProxy {
        linf_m: weighted_norm(f0, w.m, NormKind::LinfXv),
        l1: weighted_norm(f0, 0.0, NormKind::L1Xv),
        weighted_linfx_l2v: 0.0,
        weighted_l2x_l1v: 0.0,
    };
    for &t in std::iter::once(&0.0).chain(times) {
        let s = crate::transport::apply_transport(f0, t);
        let bracket = (1.0 + t * t).powf(0.75);
        p.weighted_linfx_l2v = p
            .weighted_linfx_l2v
            .max(bracket * weighted_norm(&s, w.alpha, NormKind::LinfxL2v));
        p.weighted_l2x_l1v = p
            .weighted_l2x_l1v
            .max(bracket * weighted_norm(&s, 1.0, NormKind::L2xL1v));
    }
    p
}

/// One report per snapshot, with the cumulative boundary loss filled in.
pub fn trajectory_reports(traj: &Trajectory, w: &WeightParams) -> Vec<NormReport> {
    traj.snapshots
        .iter()
        .enumerate()
        .map(|(k, s)| NormReport {
            boundary_mass_lost: traj.boundary_history.get(k).copied().unwrap_or(0.0),
            ..report(s, w)
        })
        .collect()
}
