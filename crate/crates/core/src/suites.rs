//! Check suites behind the `lemma-check`, `transport-check` and `bench` commands.
//!
//! Every check reports the measured quantity next to its tolerance so a
//! failing identity shows by how much it failed.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::collision::{
    angular_average_reference, collision_frequency, gain1, loss1, loss2, post_collision,
    r_sigma, r_sigma_inverse, r_sigma_jacobian, symmetric_terms, symmetric_terms_analytic,
    weak_form_of, CollisionInput, ReduceMode, WeakTest,
};
use crate::collision::reference::angular_average_quadrature;
use crate::error::{KweError, Result};
use crate::phase_grid::{
    dot, mixed_norm, norm, weighted_norm, DistributionField, MixedExponents, NormKind,
    PhaseSpaceGrid, SpatialGrid, SphereQuadrature, Vec3, VelocityGrid,
};
use crate::transport::{
    apply_transport, apply_transport_tracked, dispersive_decay_probe,
    transport_commutes_with_weights_check,
};

/// How a measurement is judged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    /// |measured − target| ≤ tolerance
    Near { target: f64, tolerance: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl CheckResult {
    fn judged(name: impl Into<String>, measured: f64, bound: Bound) -> Self {
        let ok = match bound {
            Bound::AtMost(limit) => measured <= limit,
            Bound::AtLeast(limit) => measured >= limit,
            Bound::Near { target, tolerance } => (measured - target).abs() <= tolerance,
        };
        Self {
            name: name.into(),
            measured,
            bound,
            passed: measured.is_finite() && ok,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self::judged(name, measured, Bound::AtMost(limit))
    }

    pub fn at_least(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self::judged(name, measured, Bound::AtLeast(limit))
    }

    pub fn near(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        Self::judged(name, measured, Bound::Near { target, tolerance })
    }

    /// Name, measurement and bound without the verdict.
    pub fn describe(&self) -> String {
        match self.bound {
            Bound::AtMost(l) => format!("{}: measured {:.3e} (limit {:.1e})", self.name, self.measured, l),
            Bound::AtLeast(l) => format!("{}: measured {:.3e} (at least {:.1e})", self.name, self.measured, l),
            Bound::Near { target, tolerance } => format!(
                "{}: measured {:.4} (target {target} ± {tolerance})",
                self.name, self.measured
            ),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}", self.describe())
    }
}

fn random_velocity(rng: &mut ChaCha8Rng, radius: f64) -> Vec3 {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let r2 = dot(v, v);
        if r2 <= 1.0 {
            return [radius * v[0], radius * v[1], radius * v[2]];
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = random_velocity(rng, 1.0);
        let r = norm(v);
        if r > 1e-3 {
            return [v[0] / r, v[1] / r, v[2] / r];
        }
    }
}

/// Closed-form angular average against direct 32×64 sphere quadrature.
pub fn check_angular_average(seed: u64, n_pairs: usize, radius: f64) -> Result<CheckResult> {
    let q = SphereQuadrature::new(32, 64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_pairs {
        let v = random_velocity(&mut rng, radius);
        let v1 = random_velocity(&mut rng, radius);
        let exact = angular_average_reference(v, v1, 1.0)?;
        let quad = angular_average_quadrature(v, v1, 1.0, &q);
        if exact > 0.0 {
            worst = worst.max((quad - exact).abs() / exact);
        }
    }
    Ok(CheckResult::at_most(
        "angular average closed form vs 32x64 quadrature (relative)",
        worst,
        1e-6,
    ))
}

/// Round trip of R_σ, the magnitude identity and the Jacobian at ν = σ.
pub fn check_r_sigma(seed: u64, n: usize) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut round_trip: f64 = 0.0;
    let mut magnitude: f64 = 0.0;
    let mut jac_at_sigma: f64 = 0.0;
    for _ in 0..n {
        let sigma = random_unit(&mut rng);
        let mut nu = random_velocity(&mut rng, 3.0);
        if dot(nu, sigma) <= 0.0 {
            nu = [-nu[0], -nu[1], -nu[2]];
        }
        if dot(nu, sigma) < 1e-3 * norm(nu) {
            continue;
        }
        let u = r_sigma_inverse(nu, sigma)?;
        let back = r_sigma(u, sigma);
        let scale = norm(nu).max(1.0);
        round_trip = round_trip.max(norm([back[0] - nu[0], back[1] - nu[1], back[2] - nu[2]]) / scale);

        let w = random_velocity(&mut rng, 3.0);
        let rw = r_sigma(w, sigma);
        if dot(rw, sigma) > 1e-6 * norm(w) {
            let m = dot(rw, rw) / dot(rw, sigma);
            magnitude = magnitude.max((m - norm(w)).abs() / norm(w).max(1.0));
        }
        jac_at_sigma = jac_at_sigma.max((r_sigma_jacobian(sigma, sigma)? - 4.0).abs());
    }
    Ok(vec![
        CheckResult::at_most("R_sigma inverse round trip", round_trip, 1e-12),
        CheckResult::at_most("R_sigma magnitude identity", magnitude, 1e-12),
        CheckResult::at_most("R_sigma Jacobian at nu = sigma minus 4", jac_at_sigma, 1e-14),
    ])
}

/// Momentum, energy and relative-speed conservation of post-collision pairs,
/// plus the involution (v, v₁, σ) ↦ (v*, v₁*, u/|u|).
pub fn check_post_collision(seed: u64, n: usize) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mom, mut energy, mut rel, mut inv): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let v = random_velocity(&mut rng, 4.0);
        let v1 = random_velocity(&mut rng, 4.0);
        let sigma = random_unit(&mut rng);
        let p = post_collision(v, v1, sigma)?;
        let (a, b) = (p.v_star, p.v1_star);
        for k in 0..3 {
            mom = mom.max((a[k] + b[k] - v[k] - v1[k]).abs());
        }
        let e0 = dot(v, v) + dot(v1, v1);
        if e0 > 0.0 {
            energy = energy.max((dot(a, a) + dot(b, b) - e0).abs() / e0);
        }
        let ab = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        let u = [v[0] - v1[0], v[1] - v1[1], v[2] - v1[2]];
        rel = rel.max((norm(ab) - norm(u)).abs());
        let ru = norm(u);
        if ru > 1e-8 {
            let back = post_collision(a, b, [u[0] / ru, u[1] / ru, u[2] / ru])?;
            for k in 0..3 {
                inv = inv
                    .max((back.v_star[k] - v[k]).abs())
                    .max((back.v1_star[k] - v1[k]).abs());
            }
        }
    }
    Ok(vec![
        CheckResult::at_most("post-collision momentum", mom, 1e-12),
        CheckResult::at_most("post-collision energy (relative)", energy, 1e-12),
        CheckResult::at_most("post-collision relative speed", rel, 1e-12),
        CheckResult::at_most("post-collision involution", inv, 1e-12),
    ])
}

/// Pointwise f·ℛ[g,g] against ℒ₁[f,g,g] + ℒ₂[f,g,g] on random positive slices.
pub fn check_loss_identity(grid: &VelocityGrid, q: &SphereQuadrature, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = grid.nodes();
    let f: Vec<f64> = nodes
        .iter()
        .map(|v| (-0.5 * dot(*v, *v)).exp() * rng.gen_range(0.5..1.5))
        .collect();
    let g: Vec<f64> = nodes
        .iter()
        .map(|v| (-0.3 * dot(*v, *v)).exp() * rng.gen_range(0.5..1.5))
        .collect();
    let r = collision_frequency(grid, &g, &g, q)?;
    let input = CollisionInput::Grid {
        grid: *grid,
        f: &f,
        g: &g,
        h: &g,
    };
    let l1 = loss1(&input, q)?;
    let l2 = loss2(&input, q)?;
    let mut worst: f64 = 0.0;
    for i in 0..grid.len() {
        let lhs = f[i] * r[i];
        let rhs = l1[i] + l2[i];
        let scale = lhs.abs().max(rhs.abs());
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(CheckResult::at_most(
        "f R[g,g] = L1[f,g,g] + L2[f,g,g] (pointwise relative)",
        worst,
        1e-13,
    ))
}

/// The three Gaussians of the duality check.
pub fn duality_profiles() -> [fn(Vec3) -> f64; 3] {
    [
        |v| (-0.5 * dot(v, v)).exp(),
        |v| 0.7 * (-((v[0] - 0.5).powi(2) + v[1] * v[1] + (v[2] + 0.3).powi(2)) / 1.5).exp(),
        |v| 1.3 * (-((v[0] + 0.2).powi(2) + (v[1] - 0.4).powi(2) + v[2] * v[2]) / 0.8).exp(),
    ]
}

/// Relative gap between ‖𝒢₁[f,g,h]‖_{L¹} and ‖ℒ₂[h,g,f]‖_{L¹}.
pub fn duality_gap(grid: &VelocityGrid, q: &SphereQuadrature) -> Result<f64> {
    let [f, g, h] = duality_profiles();
    let a = gain1(
        &CollisionInput::Analytic {
            grid: *grid,
            f: &f,
            g: &g,
            h: &h,
        },
        q,
    )?;
    let b = loss2(
        &CollisionInput::Analytic {
            grid: *grid,
            f: &h,
            g: &g,
            h: &f,
        },
        q,
    )?;
    let na: f64 = a.iter().sum::<f64>() * grid.cell_volume();
    let nb: f64 = b.iter().sum::<f64>() * grid.cell_volume();
    Ok((na - nb).abs() / nb)
}

/// max|𝒞[f]| / max|𝒢[f]| for an analytic profile.
pub fn stationarity_ratio(
    grid: &VelocityGrid,
    q: &SphereQuadrature,
    f: &(dyn Fn(Vec3) -> f64 + Sync),
) -> f64 {
    let t = symmetric_terms_analytic(f, grid, q, ReduceMode::Deterministic);
    let nodes = grid.nodes();
    let vals: Vec<f64> = nodes.iter().map(|v| f(*v)).collect();
    let c = t.collision(&vals);
    let cmax = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gmax = t.gain.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if gmax == 0.0 {
        cmax
    } else {
        cmax / gmax
    }
}

/// Weak-form residuals of exp(−|v|²/2), each relative to ‖⟨v⟩²𝒢[f]‖_{L¹}.
pub fn weak_form_relative(grid: &VelocityGrid, q: &SphereQuadrature) -> Vec<(WeakTest, f64)> {
    let f: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|v| (-0.5 * dot(*v, *v)).exp())
        .collect();
    let t = symmetric_terms(&f, grid, q, ReduceMode::Deterministic);
    let pg = PhaseSpaceGrid::homogeneous(*grid);
    let c = DistributionField {
        grid: pg,
        values: t.collision(&f),
        time: 0.0,
        nonneg_asserted: false,
    };
    let gain = DistributionField {
        grid: pg,
        values: t.gain.clone(),
        time: 0.0,
        nonneg_asserted: true,
    };
    let scale = weighted_norm(&gain, 2.0, NormKind::L1Xv);
    WeakTest::ALL
        .iter()
        .map(|&phi| (phi, weak_form_of(&c, phi).abs() / scale))
        .collect()
}

/// Tolerances of the collision suite at the configured resolution.
#[derive(Clone, Copy, Debug)]
pub struct LemmaTolerances {
    pub duality: f64,
    /// bound on the odd-moment residuals, which vanish by symmetry
    pub odd_moments: f64,
}

impl Default for LemmaTolerances {
    fn default() -> Self {
        Self {
            duality: 1e-2,
            odd_moments: 1e-12,
        }
    }
}

/// Weak-form residuals at the configured resolution and on the grid with half
/// the nodes per axis: the odd moments must vanish, the even ones must shrink.
pub fn check_weak_form(
    grid: &VelocityGrid,
    q: &SphereQuadrature,
    odd_tol: f64,
) -> Result<Vec<CheckResult>> {
    let coarse_grid = VelocityGrid::new(grid.v_max(), (grid.n_per_axis() / 2) | 1)?;
    let coarse_q = SphereQuadrature::new(
        (q.n_polar() / 2).max(2),
        ((q.n_azimuthal() / 2).max(4) + 1) & !1,
    )?;
    let fine = weak_form_relative(grid, q);
    let coarse = weak_form_relative(&coarse_grid, &coarse_q);
    let mut out = Vec::new();
    for ((phi, r_fine), (_, r_coarse)) in fine.into_iter().zip(coarse) {
        match phi {
            WeakTest::Velocity(_) => out.push(CheckResult::at_most(
                format!("weak form residual phi = {}", phi.name()),
                r_fine,
                odd_tol,
            )),
            _ => out.push(CheckResult::at_most(
                format!(
                    "weak form residual phi = {} shrinks under refinement ({:.3e} -> {:.3e}), ratio",
                    phi.name(),
                    r_coarse,
                    r_fine
                ),
                r_fine / r_coarse,
                1.0,
            )),
        }
    }
    Ok(out)
}

/// The collision identity suite.
pub fn lemma_check(
    grid: &VelocityGrid,
    q: &SphereQuadrature,
    seed: u64,
    tol: LemmaTolerances,
) -> Result<Vec<CheckResult>> {
    let mut out = vec![check_angular_average(seed, 100, 3.0)?];
    out.extend(check_r_sigma(seed.wrapping_add(1), 1000)?);
    out.extend(check_post_collision(seed.wrapping_add(2), 10_000)?);
    out.push(check_loss_identity(grid, q, seed.wrapping_add(3))?);
    out.push(CheckResult::at_most(
        "L1 duality ||G1[f,g,h]|| vs ||L2[h,g,f]|| (relative)",
        duality_gap(grid, q)?,
        tol.duality,
    ));
    let rj = |v: Vec3| 1.0 / (dot(v, v) + 1.0);
    out.push(CheckResult::at_most(
        "Rayleigh-Jeans stationarity max|C|/max|G|",
        stationarity_ratio(grid, q, &rj),
        1e-12,
    ));
    let constant = |_: Vec3| 0.5;
    out.push(CheckResult::at_most(
        "constant profile stationarity max|C|/max|G|",
        stationarity_ratio(grid, q, &constant),
        1e-12,
    ));
    out.extend(check_weak_form(grid, q, tol.odd_moments)?);
    Ok(out)
}

/// Free-streaming setup for the dim-1 decay probes: Gaussian in (x₁, v₁),
/// flat in v₂, v₃, with Δx = h_v so that integer times give exact shifts.
pub fn dispersive_setup(n_v: usize, v_max: f64, t_max: f64) -> Result<DistributionField> {
    let v = VelocityGrid::new(v_max, n_v)?;
    let h = v.spacing();
    // keep every node's support inside the box up to t_max
    let half_cells = ((v_max * t_max + 8.0) / h).ceil() as usize;
    let x = SpatialGrid::new(1, half_cells as f64 * h, 2 * half_cells + 1)?;
    Ok(DistributionField::from_fn(PhaseSpaceGrid::new(x, v), |x, v| {
        (-0.5 * x[0] * x[0] - 0.5 * v[0] * v[0]).exp()
    }))
}

/// The transport suite.
pub fn transport_check(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let v = VelocityGrid::new(3.0, 7)?;
    let x = SpatialGrid::new(1, 12.0, 49)?;
    let grid = PhaseSpaceGrid::new(x, v);
    let bump = DistributionField::from_fn(grid, |x, v| {
        let r = x[0] / 3.0;
        let s = (1.0 - r * r).max(0.0);
        s * s * (-0.5 * dot(v, v)).exp()
    });

    let same = apply_transport(&bump, 0.0);
    let identical = same.values.iter().zip(&bump.values).all(|(a, b)| a.to_bits() == b.to_bits());
    out.push(CheckResult::at_most(
        "S(0) is the identity (bitwise)",
        if identical { 0.0 } else { 1.0 },
        0.0,
    ));

    // linear data, interior stencil
    let lin = DistributionField::from_fn(grid, |x, _| x[0]);
    let t = 0.37;
    let moved = apply_transport(&lin, t);
    let mut lin_err: f64 = 0.0;
    for ix in 0..grid.x.len() {
        let xc = grid.x.coord(ix);
        for (iv, vn) in grid.v.nodes().iter().enumerate() {
            let src = xc - vn[0] * t;
            if src.abs() < grid.x.x_max() - grid.x.spacing() {
                lin_err = lin_err.max((moved.values[ix * grid.v.len() + iv] - src).abs());
            }
        }
    }
    out.push(CheckResult::at_most("linear data transported exactly", lin_err, 1e-12));

    let m0: f64 = bump.values.iter().sum();
    let tr = apply_transport_tracked(&bump, 0.83);
    let m1: f64 = tr.field.values.iter().sum();
    out.push(CheckResult::at_most(
        "mass conserved for interior support (relative)",
        (m1 - m0).abs() / m0,
        1e-13,
    ));

    let cube = PhaseSpaceGrid::new(SpatialGrid::new(3, 6.0, 13)?, VelocityGrid::new(2.0, 5)?);
    let ball = DistributionField::from_fn(cube, |x, v| {
        let s = (1.0 - dot(x, x) / 4.0).max(0.0);
        s * s * (-0.5 * dot(v, v)).exp()
    });
    let c0: f64 = ball.values.iter().sum();
    let c1: f64 = apply_transport(&ball, 0.61).values.iter().sum();
    out.push(CheckResult::at_most(
        "mass conserved for interior support, dim 3 (relative)",
        (c1 - c0).abs() / c0,
        1e-13,
    ));

    let gauss = DistributionField::from_fn(grid, |x, v| (-0.5 * x[0] * x[0] - 0.5 * dot(v, v)).exp());
    let w3 = gauss.weighted(3.0).max_abs();
    out.push(CheckResult::at_most(
        "weights commute with transport, l = 3, t = 1 (relative)",
        transport_commutes_with_weights_check(&gauss, 1.0, 3.0) / w3,
        1e-12,
    ));
    let noise: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let random = DistributionField::from_values(grid, noise, 0.0)?;
    let wm = random.weighted(9.0).max_abs();
    out.push(CheckResult::at_most(
        "weights commute with transport, l = 9, t = -2 (relative)",
        transport_commutes_with_weights_check(&random, -2.0, 9.0) / wm,
        1e-12,
    ));

    let times: Vec<f64> = (4..=8).map(f64::from).collect();
    let f0 = dispersive_setup(33, 4.0, 8.0)?;
    let p21 = dispersive_decay_probe(&f0, &times, 2.0, 1.0)?;
    out.push(CheckResult::near("decay slope dim 1, (p,r) = (2,1)", p21.slope, -0.5, 0.1));
    for p in [1.0, 2.0] {
        let probe = dispersive_decay_probe(&f0, &times, p, p)?;
        out.push(CheckResult::near(
            format!("decay slope dim 1, (p,r) = ({p},{p})"),
            probe.slope,
            0.0,
            0.02,
        ));
    }
    let e = MixedExponents {
        p_x: f64::INFINITY,
        r_v: f64::INFINITY,
    };
    let n0 = mixed_norm(&f0, 0.0, e);
    let n1 = mixed_norm(&apply_transport(&f0, 8.0), 0.0, e);
    out.push(CheckResult::at_most(
        "sup norm unchanged by exact shifts",
        (n1 - n0).abs() / n0,
        1e-15,
    ));
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub n_v: usize,
    pub n_sigma: usize,
    /// nominal (v, v₁, σ) evaluations per call, N_v²·N_σ with N_v the node count
    pub evaluations: f64,
    pub threads: Vec<usize>,
    pub rates: Vec<f64>,
}

impl BenchReport {
    /// rate(k threads) / (k · rate(1 thread)) for the largest k measured.
    pub fn parallel_efficiency(&self) -> f64 {
        match (self.rates.first(), self.rates.last(), self.threads.last()) {
            (Some(r1), Some(rk), Some(&k)) if *r1 > 0.0 => rk / (k as f64 * r1),
            _ => 0.0,
        }
    }

    pub fn best_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }
}

/// Throughput of the collision kernel on a Gaussian slice for each thread
/// count, in nominal evaluations per second.
pub fn bench(grid: &VelocityGrid, q: &SphereQuadrature, threads: &[usize], mode: ReduceMode) -> Result<BenchReport> {
    let f: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|v| (-0.5 * dot(*v, *v)).exp())
        .collect();
    let n = grid.len() as f64;
    let evaluations = n * n * q.len() as f64;
    let mut rates = Vec::new();
    for &k in threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| KweError::domain(format!("thread pool: {e}")))?;
        let start = Instant::now();
        let t = pool.install(|| symmetric_terms(&f, grid, q, mode));
        let secs = start.elapsed().as_secs_f64();
        std::hint::black_box(&t);
        rates.push(evaluations / secs);
    }
    Ok(BenchReport {
        n_v: grid.n_per_axis(),
        n_sigma: q.len(),
        evaluations,
        threads: threads.to_vec(),
        rates,
    })
}
