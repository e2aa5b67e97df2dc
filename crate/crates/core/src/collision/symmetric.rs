//! Fused evaluation of 𝒢[f] and ℛ[f,f] for a single profile f.
//!
//! With all slots equal, the term of the unordered pair {v, v₁} at direction σ
//! is shared by both endpoints: swapping v and v₁ flips the admissible
//! hemisphere and exchanges v* with v₁*, which leaves
//! (f + f₁)·f(v*)f(v₁*) and f(v*) + f(v₁*) unchanged. Each unordered pair is
//! therefore visited once and scattered to both endpoints.

use rayon::prelude::*;

use super::kernel::Compensated;
use super::{AnalyticProfile, GridProfile, Profile, ProfileFn, MIN_RELATIVE_SPEED};
use crate::phase_grid::{SphereQuadrature, Vec3, VelocityGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ReduceMode {
    /// Fixed work partition and compensated sums; bit-reproducible for any
    /// thread count.
    #[default]
    Deterministic,
    /// Work partition follows the thread pool size, so the summation order
    /// (and the last bits) depend on the thread count.
    Fast,
}

/// 𝒢[f] and ℛ[f,f] on one v-slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricTerms {
    pub gain: Vec<f64>,
    pub frequency: Vec<f64>,
}

impl SymmetricTerms {
    pub fn zeros(n: usize) -> Self {
        Self {
            gain: vec![0.0; n],
            frequency: vec![0.0; n],
        }
    }

    /// 𝒞[f] = 𝒢[f] − f·ℛ[f,f].
    pub fn collision(&self, f: &[f64]) -> Vec<f64> {
        self.gain
            .iter()
            .zip(&self.frequency)
            .zip(f)
            .map(|((g, r), f)| g - f * r)
            .collect()
    }
}

/// Fused 𝒢[f], ℛ[f,f] for a lattice slice.
pub fn symmetric_terms(
    f: &[f64],
    grid: &VelocityGrid,
    q: &SphereQuadrature,
    mode: ReduceMode,
) -> SymmetricTerms {
    symmetric_terms_pairs(&GridProfile::new(grid, f), grid, &q.half_pairs(), mode)
}

pub fn symmetric_terms_cubic(
    f: &[f64],
    grid: &VelocityGrid,
    q: &SphereQuadrature,
    mode: ReduceMode,
) -> SymmetricTerms {
    symmetric_terms_pairs(&super::CubicProfile::new(grid, f), grid, &q.half_pairs(), mode)
}

/// Fused 𝒢[f], ℛ[f,f] for a closed-form profile.
pub fn symmetric_terms_analytic(
    f: ProfileFn,
    grid: &VelocityGrid,
    q: &SphereQuadrature,
    mode: ReduceMode,
) -> SymmetricTerms {
    symmetric_terms_pairs(&AnalyticProfile::new(grid, f), grid, &q.half_pairs(), mode)
}

const DETERMINISTIC_CHUNKS: usize = 64;

struct Acc {
    gain: Vec<Compensated>,
    freq: Vec<Compensated>,
}

pub(crate) fn symmetric_terms_pairs<P: Profile>(
    f: &P,
    grid: &VelocityGrid,
    pairs: &[(Vec3, f64)],
    mode: ReduceMode,
) -> SymmetricTerms {
    let n = grid.len();
    let nodes = grid.nodes();
    let vals: Vec<f64> = (0..n).map(|i| f.node(i)).collect();
    let nonzero: Vec<usize> = (0..n).filter(|&i| vals[i] != 0.0).collect();
    if nonzero.is_empty() {
        return SymmetricTerms::zeros(n);
    }

    // work of row i: partners k > i that can contribute
    let row_work = |i: usize| -> usize {
        if vals[i] != 0.0 {
            n - i - 1
        } else {
            nonzero.len() - nonzero.partition_point(|&k| k <= i)
        }
    };
    let n_chunks = match mode {
        ReduceMode::Deterministic => DETERMINISTIC_CHUNKS,
        ReduceMode::Fast => rayon::current_num_threads().max(1),
    }
    .min(n);
    let total: usize = (0..n).map(row_work).sum();
    let mut bounds = vec![0usize];
    let mut acc_work = 0usize;
    for i in 0..n {
        acc_work += row_work(i);
        let next = bounds.len();
        if next < n_chunks && acc_work * n_chunks >= total * next {
            bounds.push(i + 1);
        }
    }
    bounds.push(n);
    bounds.dedup();

    let scale = 0.25 * grid.cell_volume();
    let process = |lo: usize, hi: usize, acc: &mut Acc| {
        for i in lo..hi {
            let vi = nodes[i];
            let fi = vals[i];
            let partners: &mut dyn Iterator<Item = usize> = if fi != 0.0 {
                &mut (i + 1..n)
            } else {
                let start = nonzero.partition_point(|&k| k <= i);
                &mut nonzero[start..].iter().copied()
            };
            for k in partners {
                let vk = nodes[k];
                let fk = vals[k];
                let u = [vi[0] - vk[0], vi[1] - vk[1], vi[2] - vk[2]];
                let r = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                if r < MIN_RELATIVE_SPEED {
                    continue;
                }
                let mid = [
                    0.5 * (vi[0] + vk[0]),
                    0.5 * (vi[1] + vk[1]),
                    0.5 * (vi[2] + vk[2]),
                ];
                let a = 0.5 * r;
                let mut s_prod = 0.0;
                let mut s_sum = 0.0;
                for (sig, w) in pairs {
                    let d = u[0] * sig[0] + u[1] * sig[1] + u[2] * sig[2];
                    if d == 0.0 {
                        continue;
                    }
                    let p = f.at([mid[0] + a * sig[0], mid[1] + a * sig[1], mid[2] + a * sig[2]]);
                    let m = f.at([mid[0] - a * sig[0], mid[1] - a * sig[1], mid[2] - a * sig[2]]);
                    s_prod += w * p * m;
                    s_sum += w * (p + m);
                }
                let c = scale * r;
                let g = c * (fi + fk) * s_prod;
                acc.gain[i].add(g);
                acc.gain[k].add(g);
                acc.freq[i].add(c * fk * s_sum);
                acc.freq[k].add(c * fi * s_sum);
            }
        }
    };

    let new_acc = || Acc {
        gain: vec![Compensated::default(); n],
        freq: vec![Compensated::default(); n],
    };
    let partials: Vec<Acc> = bounds
        .par_windows(2)
        .map(|b| {
            let mut acc = new_acc();
            process(b[0], b[1], &mut acc);
            acc
        })
        .collect();

    let mut gain = vec![Compensated::default(); n];
    let mut freq = vec![Compensated::default(); n];
    for p in &partials {
        for i in 0..n {
            gain[i].add(p.gain[i].value());
            freq[i].add(p.freq[i].value());
        }
    }
    SymmetricTerms {
        gain: gain.iter().map(Compensated::value).collect(),
        frequency: freq.iter().map(Compensated::value).collect(),
    }
}
