//! Sphere-parametrized collision operators.
//!
//! For output velocity v and partner v₁ on the lattice, u = v − v₁, V = (v + v₁)/2,
//! and for every quadrature direction σ with u·σ > 0
//!
//! ```text
//! v*  = V + |u|/2 · σ
//! v₁* = V − |u|/2 · σ
//! ```
//!
//! 𝒢₁[f,g,h](v) = ¼ ∫∫ |u| f(v₁) g(v*) h(v₁*) b(u·σ) dσ dv₁
//! 𝒢₂[f,g,h](v) = ¼ f(v) ∫∫ |u| g(v*) h(v₁*) b dσ dv₁
//! ℒ₁[f,g,h](v) = ¼ f(v) ∫∫ |u| g(v₁) h(v₁*) b dσ dv₁
//! ℒ₂[f,g,h](v) = ¼ f(v) ∫∫ |u| g(v₁) h(v*) b dσ dv₁
//! ℛ[g,h](v)    = ¼ ∫∫ |u| g(v₁) (h(v₁*) + h(v*)) b dσ dv₁
//!
//! and 𝒞[f] = 𝒢₁ + 𝒢₂ − ℒ₁ − ℒ₂ with every slot equal to f.

mod kernel;
pub(crate) use kernel::Compensated;
pub mod monte_carlo;
pub mod reference;
mod symmetric;

pub use kernel::{collision_frequency, collision_frequency_analytic, gain1, gain2, loss1, loss2, operator, Operator};
pub use monte_carlo::{monte_carlo_oracle, McEstimate};
pub use reference::{
    angular_average_reference, r_sigma, r_sigma_inverse, r_sigma_jacobian,
};
pub use symmetric::{symmetric_terms, symmetric_terms_cubic, symmetric_terms_analytic, ReduceMode, SymmetricTerms};

use rayon::prelude::*;

use crate::error::{KweError, Result};
use crate::phase_grid::{
    dot, interpolate_cubic_scaled, interpolate_scaled, norm, DistributionField, SphereQuadrature, Vec3, VelocityGrid,
};

/// Relative speeds below this contribute nothing.
pub const MIN_RELATIVE_SPEED: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PostCollisionPair {
    pub v_star: Vec3,
    pub v1_star: Vec3,
}

pub fn post_collision(v: Vec3, v1: Vec3, sigma: Vec3) -> Result<PostCollisionPair> {
    if (norm(sigma) - 1.0).abs() > 1e-12 {
        return Err(KweError::domain(format!(
            "sigma must be a unit vector, |sigma| = {}",
            norm(sigma)
        )));
    }
    let u = [v[0] - v1[0], v[1] - v1[1], v[2] - v1[2]];
    let r = 0.5 * norm(u);
    let mut v_star = [0.0; 3];
    let mut v1_star = [0.0; 3];
    for k in 0..3 {
        let mid = 0.5 * (v[k] + v1[k]);
        v_star[k] = mid + r * sigma[k];
        v1_star[k] = mid - r * sigma[k];
    }
    Ok(PostCollisionPair { v_star, v1_star })
}

/// A velocity profile: nodal values plus off-grid evaluation.
pub trait Profile: Sync {
    fn node(&self, idx: usize) -> f64;
    fn at(&self, v: Vec3) -> f64;
}

/// Lattice samples evaluated off-grid by trilinear interpolation.
pub struct GridProfile<'a> {
    values: &'a [f64],
    n: usize,
    v_max: f64,
    inv_h: f64,
}

impl<'a> GridProfile<'a> {
    pub fn new(grid: &VelocityGrid, values: &'a [f64]) -> Self {
        Self {
            values,
            n: grid.n_per_axis(),
            v_max: grid.v_max(),
            inv_h: 1.0 / grid.spacing(),
        }
    }
}

impl Profile for GridProfile<'_> {
    #[inline]
    fn node(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    #[inline(always)]
    fn at(&self, v: Vec3) -> f64 {
        interpolate_scaled(
            self.values,
            self.n,
            (v[0] + self.v_max) * self.inv_h,
            (v[1] + self.v_max) * self.inv_h,
            (v[2] + self.v_max) * self.inv_h,
        )
    }
}

/// Lattice samples evaluated off-grid by tricubic Lagrange interpolation.
pub struct CubicProfile<'a> {
    values: &'a [f64],
    n: usize,
    v_max: f64,
    inv_h: f64,
}

impl<'a> CubicProfile<'a> {
    pub fn new(grid: &VelocityGrid, values: &'a [f64]) -> Self {
        Self {
            values,
            n: grid.n_per_axis(),
            v_max: grid.v_max(),
            inv_h: 1.0 / grid.spacing(),
        }
    }
}

impl Profile for CubicProfile<'_> {
    #[inline]
    fn node(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    #[inline(always)]
    fn at(&self, v: Vec3) -> f64 {
        interpolate_cubic_scaled(
            self.values,
            self.n,
            (v[0] + self.v_max) * self.inv_h,
            (v[1] + self.v_max) * self.inv_h,
            (v[2] + self.v_max) * self.inv_h,
        )
    }
}

/// Closed-form profile evaluated exactly everywhere.
pub struct AnalyticProfile<'a> {
    nodes: Vec<f64>,
    func: &'a (dyn Fn(Vec3) -> f64 + Sync),
}

impl<'a> AnalyticProfile<'a> {
    pub fn new(grid: &VelocityGrid, func: &'a (dyn Fn(Vec3) -> f64 + Sync)) -> Self {
        let nodes = (0..grid.len()).map(|i| func(grid.node(i))).collect();
        Self { nodes, func }
    }
}

impl Profile for AnalyticProfile<'_> {
    #[inline]
    fn node(&self, idx: usize) -> f64 {
        self.nodes[idx]
    }

    #[inline]
    fn at(&self, v: Vec3) -> f64 {
        (self.func)(v)
    }
}

pub type ProfileFn<'a> = &'a (dyn Fn(Vec3) -> f64 + Sync);

/// The triple (f, g, h) fed to a multilinear operator.
pub enum CollisionInput<'a> {
    Grid {
        grid: VelocityGrid,
        f: &'a [f64],
        g: &'a [f64],
        h: &'a [f64],
    },
    Analytic {
        grid: VelocityGrid,
        f: ProfileFn<'a>,
        g: ProfileFn<'a>,
        h: ProfileFn<'a>,
    },
}

impl CollisionInput<'_> {
    pub fn grid(&self) -> VelocityGrid {
        match self {
            CollisionInput::Grid { grid, .. } | CollisionInput::Analytic { grid, .. } => *grid,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let CollisionInput::Grid { grid, f, g, h } = self {
            let n = grid.len();
            if f.len() != n || g.len() != n || h.len() != n {
                return Err(KweError::domain(format!(
                    "collision inputs must share the velocity grid ({} nodes), got {}, {}, {}",
                    n,
                    f.len(),
                    g.len(),
                    h.len()
                )));
            }
        }
        Ok(())
    }
}

/// 𝒞[f] per x-node using the fused pair-symmetric kernel.
pub fn collision_full(f: &DistributionField, q: &SphereQuadrature) -> DistributionField {
    collision_parts(f, q, ReduceMode::Deterministic).collision()
}

/// 𝒢[f] = 𝒢₁[f,f,f] + 𝒢₂[f,f,f] per x-node.
pub fn gain_full(f: &DistributionField, q: &SphereQuadrature) -> DistributionField {
    collision_parts(f, q, ReduceMode::Deterministic).gain
}

/// Gain and collision frequency ℛ[f,f] of a whole field, from one pass per x-node.
#[derive(Clone, Debug)]
pub struct CollisionParts {
    pub field: DistributionField,
    pub gain: DistributionField,
    pub frequency: DistributionField,
}

impl CollisionParts {
    /// 𝒢[f] − f·ℛ[f,f].
    pub fn collision(&self) -> DistributionField {
        let values = self
            .gain
            .values
            .iter()
            .zip(&self.frequency.values)
            .zip(&self.field.values)
            .map(|((g, r), f)| g - f * r)
            .collect();
        DistributionField {
            grid: self.field.grid,
            values,
            time: self.field.time,
            nonneg_asserted: false,
        }
    }

    pub fn loss(&self) -> DistributionField {
        let values = self
            .frequency
            .values
            .iter()
            .zip(&self.field.values)
            .map(|(r, f)| f * r)
            .collect();
        DistributionField {
            grid: self.field.grid,
            values,
            time: self.field.time,
            nonneg_asserted: false,
        }
    }
}

pub fn collision_parts(
    f: &DistributionField,
    q: &SphereQuadrature,
    mode: ReduceMode,
) -> CollisionParts {
    let grid = f.grid;
    let nv = grid.v.len();
    let pairs = q.half_pairs();
    let per_node: Vec<SymmetricTerms> = (0..grid.x.len())
        .into_par_iter()
        .map(|ix| {
            let s = f.slice(ix);
            if s.iter().all(|&x| x == 0.0) {
                SymmetricTerms::zeros(nv)
            } else {
                symmetric::symmetric_terms_pairs(&GridProfile::new(&grid.v, s), &grid.v, &pairs, mode)
            }
        })
        .collect();
    let mut gain = Vec::with_capacity(grid.len());
    let mut freq = Vec::with_capacity(grid.len());
    for t in per_node {
        gain.extend_from_slice(&t.gain);
        freq.extend_from_slice(&t.frequency);
    }
    let mk = |values: Vec<f64>| DistributionField {
        grid,
        values,
        time: f.time,
        nonneg_asserted: false,
    };
    CollisionParts {
        field: f.clone(),
        gain: mk(gain),
        frequency: mk(freq),
    }
}

/// Test function φ in the weak form ∫∫ φ(v) 𝒞[f] dv dx.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeakTest {
    One,
    Velocity(usize),
    Energy,
}

impl WeakTest {
    pub const ALL: [WeakTest; 5] = [
        WeakTest::One,
        WeakTest::Velocity(0),
        WeakTest::Velocity(1),
        WeakTest::Velocity(2),
        WeakTest::Energy,
    ];

    pub fn eval(self, v: Vec3) -> f64 {
        match self {
            WeakTest::One => 1.0,
            WeakTest::Velocity(k) => v[k],
            WeakTest::Energy => dot(v, v),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeakTest::One => "1",
            WeakTest::Velocity(0) => "v_x",
            WeakTest::Velocity(1) => "v_y",
            WeakTest::Velocity(_) => "v_z",
            WeakTest::Energy => "|v|^2",
        }
    }
}

/// ∫∫ φ(v) c(x, v) dv dx as a Riemann sum, for an already evaluated 𝒞[f].
pub fn weak_form_of(c: &DistributionField, phi: WeakTest) -> f64 {
    let grid = c.grid;
    let nodes = grid.v.nodes();
    let mut total = 0.0;
    for ix in 0..grid.x.len() {
        let s = c.slice(ix);
        let part: f64 = s.iter().zip(&nodes).map(|(c, v)| c * phi.eval(*v)).sum();
        total += part;
    }
    total * grid.cell_measure()
}

pub fn weak_form_residual(f: &DistributionField, phi: WeakTest, q: &SphereQuadrature) -> f64 {
    if f.is_zero() {
        return 0.0;
    }
    weak_form_of(&collision_full(f, q), phi)
}
