//! Time integration: Strang splitting, Picard iteration of the Duhamel
//! formula, the gain-only equation and negative-time evolution.

use log::{info, warn};

use crate::collision::{collision_parts, ReduceMode};
use crate::diagnostics::{x_norm_proxy, XNormProxy};
use crate::error::{KweError, Result};
use crate::phase_grid::{weighted_norm, DistributionField, NormKind, SphereQuadrature, WeightParams};
use crate::transport::apply_transport_tracked;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub t_end: f64,
    pub dt: f64,
    pub snapshot_stride: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub gain_only: bool,
    pub weights: WeightParams,
    pub epsilon0_budget: f64,
    /// Allowed boundary mass loss as a fraction of the initial mass.
    pub boundary_budget: f64,
    /// Longest horizon accepted by [`picard_solve`].
    pub picard_horizon: f64,
    /// Gap tolerance of the Kaniel–Shinbrot loop, relative to ‖f₀‖_{L¹}.
    pub ks_tol: f64,
    pub ks_max_iter: usize,
    /// Allowed nesting violation before clipping turns into a fault.
    pub ks_nesting_tol: f64,
    pub reduce: ReduceMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: 0.1,
            snapshot_stride: 1,
            picard_tol: 1e-12,
            picard_max_iter: 50,
            gain_only: false,
            weights: WeightParams::default(),
            epsilon0_budget: 0.1,
            boundary_budget: 1e-8,
            picard_horizon: 3.0,
            ks_tol: 1e-6,
            ks_max_iter: 20,
            ks_nesting_tol: 1e-12,
            reduce: ReduceMode::Deterministic,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(KweError::config("solver.dt", "must be > 0"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(KweError::config("solver.t_end", "must be >= 0"));
        }
        if !(self.picard_tol > 0.0) {
            return Err(KweError::config("solver.picard_tol", "must be > 0"));
        }
        if self.snapshot_stride == 0 {
            return Err(KweError::config("solver.snapshot_stride", "must be >= 1"));
        }
        steps_for(self.t_end, self.dt, "solver.t_end")?;
        Ok(())
    }

    /// Spacing of the snapshot grid used by the Duhamel quadratures.
    pub fn snapshot_dt(&self) -> f64 {
        self.dt * self.snapshot_stride as f64
    }
}

fn steps_for(t: f64, dt: f64, path: &str) -> Result<usize> {
    let n = (t / dt).round();
    if (n * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(KweError::config(
            path,
            format!("{t} is not a whole number of steps of {dt}"),
        ));
    }
    Ok(n as usize)
}

/// Right-hand side of the homogeneous part: 𝒞[f] or 𝒢[f].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dynamics {
    Full,
    GainOnly,
}

impl Dynamics {
    pub fn from_flag(gain_only: bool) -> Self {
        if gain_only {
            Dynamics::GainOnly
        } else {
            Dynamics::Full
        }
    }
}

/// Forward: ∂ₜf + v·∇ₓf = 𝒞[f]. Backward: ∂ₜg − v·∇ₓg = −𝒞[g], relabelled
/// f(−t) = g(t).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Evaluated right-hand side plus max ℛ[f,f] (for the step-size warning).
pub fn rhs(
    f: &DistributionField,
    q: &SphereQuadrature,
    dynamics: Dynamics,
    reduce: ReduceMode,
) -> (DistributionField, f64) {
    if f.is_zero() {
        return (DistributionField::zeros(f.grid).with_time(f.time), 0.0);
    }
    let parts = collision_parts(f, q, reduce);
    let max_r = parts.frequency.max_abs();
    let out = match dynamics {
        Dynamics::Full => parts.collision(),
        Dynamics::GainOnly => parts.gain,
    };
    (out, max_r)
}

#[derive(Clone, Debug)]
pub struct Step {
    pub field: DistributionField,
    pub boundary_mass_lost: f64,
    pub max_frequency: f64,
}

/// One Strang step S(dt/2) ∘ midpoint(dt) ∘ S(dt/2) in the given direction.
pub fn step_strang_directed(
    f: &DistributionField,
    dt: f64,
    q: &SphereQuadrature,
    dynamics: Dynamics,
    direction: Direction,
    reduce: ReduceMode,
) -> Result<Step> {
    if !(dt > 0.0) {
        return Err(KweError::domain("step size must be > 0"));
    }
    let s = direction.sign();
    let half = apply_transport_tracked(f, 0.5 * s * dt);
    let h = half.field;
    let (k1, r1) = rhs(&h, q, dynamics, reduce);
    let mid = h.axpy(0.5 * s * dt, &k1);
    let (k2, r2) = rhs(&mid, q, dynamics, reduce);
    let c = h.axpy(s * dt, &k2);
    let end = apply_transport_tracked(&c, 0.5 * s * dt);
    let field = end.field.with_time(f.time + s * dt);
    field.check_finite()?;
    Ok(Step {
        field,
        boundary_mass_lost: half.boundary_mass_lost + end.boundary_mass_lost,
        max_frequency: r1.max(r2),
    })
}

pub fn step_strang(
    f: &DistributionField,
    dt: f64,
    q: &SphereQuadrature,
    gain_only: bool,
) -> Result<DistributionField> {
    Ok(step_strang_directed(
        f,
        dt,
        q,
        Dynamics::from_flag(gain_only),
        Direction::Forward,
        ReduceMode::Deterministic,
    )?
    .field)
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<DistributionField>,
    pub boundary_mass_lost: f64,
    /// cumulative boundary loss at each snapshot
    pub boundary_history: Vec<f64>,
    pub direction: Direction,
    /// Whether the X-ingredient norms of f₀ were within the smallness budget.
    pub dispersive_certified: bool,
}

impl Trajectory {
    /// A trajectory assembled from snapshots that were not transported
    /// through the box boundary by this crate's stepper.
    pub fn from_snapshots(snapshots: Vec<DistributionField>, direction: Direction) -> Self {
        Self {
            boundary_history: vec![0.0; snapshots.len()],
            snapshots,
            boundary_mass_lost: 0.0,
            direction,
            dispersive_certified: false,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> &DistributionField {
        self.snapshots.last().expect("trajectory is never empty")
    }

    pub fn first(&self) -> &DistributionField {
        &self.snapshots[0]
    }
}

/// Ingredient norms of f₀ and whether every one is within the budget.
pub fn certify_smallness(f0: &DistributionField, cfg: &SolverConfig) -> (bool, XNormProxy) {
    let n = 8;
    let times: Vec<f64> = (1..=n).map(|k| cfg.t_end * k as f64 / n as f64).collect();
    let proxy = x_norm_proxy(f0, &cfg.weights, &times);
    (proxy.max() <= cfg.epsilon0_budget, proxy)
}

fn integrate(
    f0: &DistributionField,
    cfg: &SolverConfig,
    q: &SphereQuadrature,
    direction: Direction,
) -> Result<Trajectory> {
    cfg.validate()?;
    f0.check_finite()?;
    let dynamics = Dynamics::from_flag(cfg.gain_only);
    let n_steps = steps_for(cfg.t_end, cfg.dt, "solver.t_end")?;
    let (certified, proxy) = certify_smallness(f0, cfg);
    if !certified {
        info!(
            "initial data outside the smallness budget {} (largest X ingredient {:.3e}); dispersive regime not certified",
            cfg.epsilon0_budget,
            proxy.max()
        );
    }
    let mass0: f64 = f0.values.iter().map(|x| x.abs()).sum::<f64>() * f0.grid.cell_measure();
    let mut snaps = vec![f0.clone().with_time(0.0)];
    let mut history = vec![0.0];
    let mut current = f0.clone().with_time(0.0);
    let mut lost = 0.0;
    let mut warned = false;
    for step in 1..=n_steps {
        let st = step_strang_directed(&current, cfg.dt, q, dynamics, direction, cfg.reduce)?;
        lost += st.boundary_mass_lost;
        if !warned && cfg.dt * st.max_frequency > 0.1 {
            warn!(
                "dt * max R = {:.3e} exceeds 0.1 at t = {}",
                cfg.dt * st.max_frequency,
                st.field.time
            );
            warned = true;
        }
        if lost.abs() > cfg.boundary_budget * mass0 && mass0 > 0.0 {
            return Err(KweError::Instability {
                time: st.field.time,
                message: format!(
                    "boundary-mass budget exceeded: lost {:.3e} of initial mass {:.3e}",
                    lost, mass0
                ),
            });
        }
        current = st.field;
        if step % cfg.snapshot_stride == 0 || step == n_steps {
            snaps.push(current.clone());
            history.push(lost);
        }
    }
    Ok(Trajectory {
        snapshots: snaps,
        boundary_mass_lost: lost,
        boundary_history: history,
        direction,
        dispersive_certified: certified,
    })
}

/// Strang-split evolution on [0, t_end].
pub fn run(f0: &DistributionField, cfg: &SolverConfig, q: &SphereQuadrature) -> Result<Trajectory> {
    integrate(f0, cfg, q, Direction::Forward)
}

/// Evolution to negative times through the reversed system; snapshot times
/// are 0, −Δ, −2Δ, …
pub fn run_backward(
    f0: &DistributionField,
    cfg: &SolverConfig,
    q: &SphereQuadrature,
) -> Result<Trajectory> {
    integrate(f0, cfg, q, Direction::Backward)
}

/// Composite trapezoid weights on the nodes j = lo..=hi.
pub(crate) fn trapezoid_weight(j: usize, lo: usize, hi: usize) -> f64 {
    if lo == hi {
        0.0
    } else if j == lo || j == hi {
        0.5
    } else {
        1.0
    }
}

/// Σ_j τ_j S(t − t_j) c_j over the nodes j = lo..=hi, scaled by Δ.
pub(crate) fn duhamel_sum(
    c: &[DistributionField],
    times: &[f64],
    t: f64,
    lo: usize,
    hi: usize,
    delta: f64,
) -> DistributionField {
    let grid = c[0].grid;
    let mut acc = vec![0.0; grid.len()];
    for j in lo..=hi {
        let w = trapezoid_weight(j, lo, hi) * delta;
        if w == 0.0 || c[j].is_zero() {
            continue;
        }
        let moved = crate::transport::apply_transport(&c[j], t - times[j]);
        for (a, b) in acc.iter_mut().zip(&moved.values) {
            *a += w * b;
        }
    }
    DistributionField {
        grid,
        values: acc,
        time: t,
        nonneg_asserted: false,
    }
}

fn sup_weighted_diff(a: &[DistributionField], b: &[DistributionField], m: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| weighted_norm(&x.axpy(-1.0, y), m, NormKind::LinfXv))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct PicardReport {
    pub trajectory: Trajectory,
    /// sup_t ‖⟨v⟩^M (f^{(m+1)} − f^{(m)})‖_{L∞} per sweep
    pub increments: Vec<f64>,
    /// successive increment ratios
    pub ratios: Vec<f64>,
    pub iterations: usize,
    /// most negative nodewise change between successive iterates
    pub min_step_change: f64,
}

impl PicardReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// Fixed-point iteration over trajectories on the snapshot grid of [0, horizon]:
/// f(t_k) = S(t_k)f₀ + Σ_j τ_j S(t_k − t_j) rhs[f](t_j).
pub(crate) fn picard_iterate(
    f0: &DistributionField,
    horizon: f64,
    cfg: &SolverConfig,
    q: &SphereQuadrature,
    dynamics: Dynamics,
) -> Result<PicardReport> {
    cfg.validate()?;
    let delta = cfg.snapshot_dt();
    let k_max = steps_for(horizon, delta, "solver.t_end")?;
    let times: Vec<f64> = (0..=k_max).map(|k| k as f64 * delta).collect();
    let f0 = f0.clone().with_time(0.0);
    let free: Vec<DistributionField> = times
        .iter()
        .map(|&t| crate::transport::apply_transport(&f0, t))
        .collect();
    let mut current = free.clone();
    let mut increments = Vec::new();
    let mut ratios = Vec::new();
    let mut above_one = 0;
    let mut min_change = 0.0f64;
    for iter in 1..=cfg.picard_max_iter {
        let c: Vec<DistributionField> = current
            .iter()
            .map(|f| rhs(f, q, dynamics, cfg.reduce).0)
            .collect();
        let next: Vec<DistributionField> = (0..=k_max)
            .map(|k| {
                if k == 0 {
                    return free[0].clone();
                }
                let d = duhamel_sum(&c, &times, times[k], 0, k, delta);
                let mut out = free[k].axpy(1.0, &d);
                out.time = times[k];
                out
            })
            .collect();
        for f in &next {
            f.check_finite()?;
        }
        for (a, b) in next.iter().zip(&current) {
            for (x, y) in a.values.iter().zip(&b.values) {
                min_change = min_change.min(x - y);
            }
        }
        let inc = sup_weighted_diff(&next, &current, cfg.weights.m);
        if let Some(&prev) = increments.last() {
            let ratio: f64 = if prev > 0.0 { inc / prev } else { 0.0 };
            ratios.push(ratio);
            if ratio >= 1.0 {
                above_one += 1;
            } else {
                above_one = 0;
            }
        }
        increments.push(inc);
        current = next;
        if inc < cfg.picard_tol {
            return Ok(PicardReport {
                trajectory: Trajectory::from_snapshots(current, Direction::Forward),
                increments,
                ratios,
                iterations: iter,
                min_step_change: min_change,
            });
        }
        if above_one >= 3 {
            let n0 = weighted_norm(&f0, cfg.weights.m, NormKind::LinfXv);
            return Err(KweError::property(format!(
                "Picard iteration is not contracting (ratios {ratios:?}); smallness violated: ‖⟨v⟩^M f0‖_inf = {n0:.3e}, ‖f0‖_L1 = {:.3e}",
                weighted_norm(&f0, 0.0, NormKind::L1Xv)
            )));
        }
    }
    Err(KweError::property(format!(
        "Picard iteration did not reach tolerance {} in {} sweeps (last increment {:.3e})",
        cfg.picard_tol,
        cfg.picard_max_iter,
        increments.last().copied().unwrap_or(f64::NAN)
    )))
}

/// Picard iteration of the Duhamel formula on [0, t_loc].
pub fn picard_solve(
    f0: &DistributionField,
    t_loc: f64,
    cfg: &SolverConfig,
    q: &SphereQuadrature,
) -> Result<PicardReport> {
    if t_loc > cfg.picard_horizon + 1e-12 {
        return Err(KweError::domain(format!(
            "picard_solve horizon {t_loc} exceeds the configured limit {}",
            cfg.picard_horizon
        )));
    }
    picard_iterate(f0, t_loc, cfg, q, Dynamics::from_flag(cfg.gain_only))
}

/// Gain-only equation on [0, t_end] by the monotone iteration started from
/// S(t)f₀.
pub fn gain_only_solve(
    f0: &DistributionField,
    cfg: &SolverConfig,
    q: &SphereQuadrature,
) -> Result<PicardReport> {
    if f0.min_value() < 0.0 {
        return Err(KweError::domain("gain_only_solve requires f0 >= 0"));
    }
    let mut rep = picard_iterate(f0, cfg.t_end, cfg, q, Dynamics::GainOnly)?;
    let scale = rep
        .trajectory
        .snapshots
        .iter()
        .map(|s| s.max_abs())
        .fold(0.0, f64::max);
    let floor = -1e-14 * scale;
    for s in &mut rep.trajectory.snapshots {
        let m = s.min_value();
        if m < floor {
            return Err(KweError::property(format!(
                "gain-only iterate negative ({m:.3e}) at t = {}",
                s.time
            )));
        }
        s.nonneg_asserted = true;
    }
    if rep.min_step_change < floor {
        return Err(KweError::property(format!(
            "gain-only iterates decreased by {:.3e}",
            rep.min_step_change
        )));
    }
    rep.trajectory.dispersive_certified = certify_smallness(f0, cfg).0;
    Ok(rep)
}
