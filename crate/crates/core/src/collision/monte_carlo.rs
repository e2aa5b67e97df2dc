//! Seeded Monte Carlo estimator of the parametrized operators, used to
//! cross-check the deterministic kernel.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{AnalyticProfile, CollisionInput, GridProfile, Operator, Profile};
use crate::error::{KweError, Result};
use crate::phase_grid::{Vec3, VelocityGrid};

/// Per-node sample mean and its standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

fn node_seed(seed: u64, node: usize) -> u64 {
    // splitmix64 of (seed, node) so neighbouring nodes get unrelated streams
    let mut z = seed ^ (node as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn estimate<P: Profile>(
    op: Operator,
    grid: &VelocityGrid,
    f: &P,
    g: &P,
    h: &P,
    n_samples: usize,
    seed: u64,
) -> McEstimate {
    let vmax = grid.v_max();
    // uniform densities: 1/(2 v_max)³ on the box, 1/(4π) on the sphere
    let scale = 0.25 * (2.0 * vmax).powi(3) * 4.0 * PI;
    let results: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let v = grid.node(i);
            let mut rng = ChaCha8Rng::seed_from_u64(node_seed(seed, i));
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n_samples {
                let v1: Vec3 = [
                    vmax * (2.0 * rng.gen::<f64>() - 1.0),
                    vmax * (2.0 * rng.gen::<f64>() - 1.0),
                    vmax * (2.0 * rng.gen::<f64>() - 1.0),
                ];
                let z = 2.0 * rng.gen::<f64>() - 1.0;
                let phi = 2.0 * PI * rng.gen::<f64>();
                let s = (1.0 - z * z).max(0.0).sqrt();
                let sig = [s * phi.cos(), s * phi.sin(), z];
                let u = [v[0] - v1[0], v[1] - v1[1], v[2] - v1[2]];
                let d = u[0] * sig[0] + u[1] * sig[1] + u[2] * sig[2];
                let x = if d > 0.0 {
                    let r = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                    let mut vs = [0.0; 3];
                    let mut v1s = [0.0; 3];
                    for k in 0..3 {
                        let mid = 0.5 * (v[k] + v1[k]);
                        vs[k] = mid + 0.5 * r * sig[k];
                        v1s[k] = mid - 0.5 * r * sig[k];
                    }
                    let prod = match op {
                        Operator::Gain1 => f.at(v1) * g.at(vs) * h.at(v1s),
                        Operator::Gain2 => f.node(i) * g.at(vs) * h.at(v1s),
                        Operator::Loss1 => f.node(i) * g.at(v1) * h.at(v1s),
                        Operator::Loss2 => f.node(i) * g.at(v1) * h.at(vs),
                    };
                    scale * r * prod
                } else {
                    0.0
                };
                s1 += x;
                s2 += x * x;
            }
            let n = n_samples as f64;
            let mean = s1 / n;
            let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
            (mean, (var / n).sqrt())
        })
        .collect();
    McEstimate {
        mean: results.iter().map(|r| r.0).collect(),
        std_error: results.iter().map(|r| r.1).collect(),
    }
}

/// Unbiased estimate of one operator at every lattice node, deterministic for
/// a fixed seed (each node draws from its own stream).
pub fn monte_carlo_oracle(
    op: Operator,
    input: &CollisionInput,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < 1000 {
        return Err(KweError::domain("monte_carlo_oracle needs n_samples >= 1000"));
    }
    input.validate()?;
    Ok(match input {
        CollisionInput::Grid { grid, f, g, h } => estimate(
            op,
            grid,
            &GridProfile::new(grid, f),
            &GridProfile::new(grid, g),
            &GridProfile::new(grid, h),
            n_samples,
            seed,
        ),
        CollisionInput::Analytic { grid, f, g, h } => estimate(
            op,
            grid,
            &AnalyticProfile::new(grid, *f),
            &AnalyticProfile::new(grid, *g),
            &AnalyticProfile::new(grid, *h),
            n_samples,
            seed,
        ),
    })
}
