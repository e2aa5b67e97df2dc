use rayon::prelude::*;

use super::{
    AnalyticProfile, CollisionInput, GridProfile, Profile, ProfileFn, MIN_RELATIVE_SPEED,
};
use crate::error::{KweError, Result};
use crate::phase_grid::{SphereQuadrature, Vec3, VelocityGrid};

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    Gain1,
    Gain2,
    Loss1,
    Loss2,
}

/// One sweep over (v₁, σ) for every output node:
/// out(v) = ¼·h³·outer(v)·Σ_{v₁} inner(v₁) Σ_σ w |u| b(u·σ) star(v*, v₁*).
///
/// Each antipodal pair contributes through the member with u·σ > 0, which is
/// the same set of terms as the literal cutoff sum.
fn sweep<O, I, S>(grid: &VelocityGrid, q: &SphereQuadrature, outer: O, inner: I, star: S) -> Vec<f64>
where
    O: Fn(usize) -> f64 + Sync,
    I: Fn(usize) -> f64 + Sync,
    S: Fn(Vec3, Vec3) -> f64 + Sync,
{
    let pairs = q.half_pairs();
    let nodes = grid.nodes();
    let inner_vals: Vec<f64> = (0..grid.len()).map(&inner).collect();
    let active: Vec<usize> = (0..grid.len()).filter(|&k| inner_vals[k] != 0.0).collect();
    let scale = 0.25 * grid.cell_volume();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let o = outer(i);
            if o == 0.0 {
                return 0.0;
            }
            let v = nodes[i];
            let mut acc = Compensated::default();
            for &k in &active {
                let v1 = nodes[k];
                let u = [v[0] - v1[0], v[1] - v1[1], v[2] - v1[2]];
                let r = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                if r < MIN_RELATIVE_SPEED {
                    continue;
                }
                let mid = [
                    0.5 * (v[0] + v1[0]),
                    0.5 * (v[1] + v1[1]),
                    0.5 * (v[2] + v1[2]),
                ];
                let a = 0.5 * r;
                let mut s = 0.0;
                for (sig, w) in &pairs {
                    let d = u[0] * sig[0] + u[1] * sig[1] + u[2] * sig[2];
                    if d == 0.0 {
                        continue;
                    }
                    let p = [mid[0] + a * sig[0], mid[1] + a * sig[1], mid[2] + a * sig[2]];
                    let m = [mid[0] - a * sig[0], mid[1] - a * sig[1], mid[2] - a * sig[2]];
                    s += if d > 0.0 { w * star(p, m) } else { w * star(m, p) };
                }
                acc.add(inner_vals[k] * r * s);
            }
            scale * o * acc.value()
        })
        .collect()
}

fn operator_on<P: Profile>(op: Operator, grid: &VelocityGrid, q: &SphereQuadrature, f: &P, g: &P, h: &P) -> Vec<f64> {
    match op {
        Operator::Gain1 => sweep(grid, q, |_| 1.0, |k| f.node(k), |p, m| g.at(p) * h.at(m)),
        Operator::Gain2 => sweep(grid, q, |i| f.node(i), |_| 1.0, |p, m| g.at(p) * h.at(m)),
        Operator::Loss1 => sweep(grid, q, |i| f.node(i), |k| g.node(k), |_, m| h.at(m)),
        Operator::Loss2 => sweep(grid, q, |i| f.node(i), |k| g.node(k), |p, _| h.at(p)),
    }
}

/// Evaluate one multilinear operator at every node of the input's grid.
pub fn operator(op: Operator, input: &CollisionInput, q: &SphereQuadrature) -> Result<Vec<f64>> {
    input.validate()?;
    Ok(match input {
        CollisionInput::Grid { grid, f, g, h } => {
            let (f, g, h) = (
                GridProfile::new(grid, f),
                GridProfile::new(grid, g),
                GridProfile::new(grid, h),
            );
            operator_on(op, grid, q, &f, &g, &h)
        }
        CollisionInput::Analytic { grid, f, g, h } => {
            let (f, g, h) = (
                AnalyticProfile::new(grid, *f),
                AnalyticProfile::new(grid, *g),
                AnalyticProfile::new(grid, *h),
            );
            operator_on(op, grid, q, &f, &g, &h)
        }
    })
}

pub fn gain1(input: &CollisionInput, q: &SphereQuadrature) -> Result<Vec<f64>> {
    operator(Operator::Gain1, input, q)
}

pub fn gain2(input: &CollisionInput, q: &SphereQuadrature) -> Result<Vec<f64>> {
    operator(Operator::Gain2, input, q)
}

pub fn loss1(input: &CollisionInput, q: &SphereQuadrature) -> Result<Vec<f64>> {
    operator(Operator::Loss1, input, q)
}

pub fn loss2(input: &CollisionInput, q: &SphereQuadrature) -> Result<Vec<f64>> {
    operator(Operator::Loss2, input, q)
}

fn frequency_on<P: Profile>(grid: &VelocityGrid, q: &SphereQuadrature, g: &P, h: &P) -> Vec<f64> {
    sweep(grid, q, |_| 1.0, |k| g.node(k), |p, m| h.at(m) + h.at(p))
}

/// ℛ[g,h] on a shared grid.
pub fn collision_frequency(
    grid: &VelocityGrid,
    g: &[f64],
    h: &[f64],
    q: &SphereQuadrature,
) -> Result<Vec<f64>> {
    if g.len() != grid.len() || h.len() != grid.len() {
        return Err(KweError::domain(
            "collision_frequency: slices do not match the velocity grid",
        ));
    }
    Ok(frequency_on(
        grid,
        q,
        &GridProfile::new(grid, g),
        &GridProfile::new(grid, h),
    ))
}

/// ℛ[g,h] for closed-form profiles.
pub fn collision_frequency_analytic(
    grid: &VelocityGrid,
    g: ProfileFn,
    h: ProfileFn,
    q: &SphereQuadrature,
) -> Vec<f64> {
    frequency_on(
        grid,
        q,
        &AnalyticProfile::new(grid, g),
        &AnalyticProfile::new(grid, h),
    )
}
