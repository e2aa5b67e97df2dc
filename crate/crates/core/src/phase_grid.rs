//! Velocity and space lattices, sphere quadrature, sampled fields,
//! weighted mixed norms and off-grid velocity interpolation.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{KweError, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// ⟨v⟩ = sqrt(1 + |v|²).
#[inline]
pub fn japanese(v: Vec3) -> f64 {
    (1.0 + dot(v, v)).sqrt()
}

/// Uniform node-centred lattice on [−v_max, v_max]³ with an odd node count
/// per axis, so the origin is a node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityGrid {
    v_max: f64,
    n: usize,
}

impl VelocityGrid {
    pub fn new(v_max: f64, n_per_axis: usize) -> Result<Self> {
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(KweError::config("grid.v_max", "must be finite and > 0"));
        }
        if n_per_axis < 3 || n_per_axis % 2 == 0 {
            return Err(KweError::config(
                "grid.n_v",
                format!("must be odd and >= 3, got {n_per_axis}"),
            ));
        }
        Ok(Self { v_max, n: n_per_axis })
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.v_max / (self.n - 1) as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Total node count n³.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        // symmetric formula keeps ±v exactly mirrored
        let half = (self.n - 1) / 2;
        (i as f64 - half as f64) * self.spacing()
    }

    /// Lexicographic index with x fastest, then y, then z.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.n + iy) * self.n + ix
    }

    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize, usize) {
        let ix = idx % self.n;
        let iy = (idx / self.n) % self.n;
        let iz = idx / (self.n * self.n);
        (ix, iy, iz)
    }

    pub fn node(&self, idx: usize) -> Vec3 {
        let (ix, iy, iz) = self.split(idx);
        [self.coord(ix), self.coord(iy), self.coord(iz)]
    }

    pub fn nodes(&self) -> Vec<Vec3> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// ⟨v⟩^power at every node.
    pub fn bracket_powers(&self, power: f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                if power == 0.0 {
                    1.0
                } else {
                    japanese(self.node(i)).powf(power)
                }
            })
            .collect()
    }

    pub fn contains(&self, v: Vec3) -> bool {
        v.iter().all(|c| c.abs() <= self.v_max)
    }
}

/// Spatial lattice: a single cell (dim 0), a slab in x₁ (dim 1) or a cube (dim 3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    x_max: f64,
    n: usize,
}

impl SpatialGrid {
    pub fn homogeneous() -> Self {
        Self {
            dim: 0,
            x_max: 0.0,
            n: 1,
        }
    }

    pub fn new(dim: usize, x_max: f64, n_per_axis: usize) -> Result<Self> {
        match dim {
            0 => Ok(Self::homogeneous()),
            1 | 3 => {
                if !(x_max.is_finite() && x_max > 0.0) {
                    return Err(KweError::config("grid.x_max", "must be finite and > 0"));
                }
                if n_per_axis < 2 {
                    return Err(KweError::config("grid.n_x", "must be >= 2"));
                }
                Ok(Self {
                    dim,
                    x_max,
                    n: n_per_axis,
                })
            }
            _ => Err(KweError::config(
                "grid.dim_x",
                format!("must be 0, 1 or 3, got {dim}"),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    /// Node spacing; 1 for the homogeneous cell.
    pub fn spacing(&self) -> f64 {
        if self.dim == 0 {
            1.0
        } else {
            2.0 * self.x_max / (self.n - 1) as f64
        }
    }

    pub fn cell_measure(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        (i as f64 - 0.5 * (self.n - 1) as f64) * self.spacing()
    }

    /// Position of spatial node `idx` (unused components are 0).
    pub fn node(&self, idx: usize) -> Vec3 {
        match self.dim {
            0 => [0.0; 3],
            1 => [self.coord(idx), 0.0, 0.0],
            _ => {
                let n = self.n;
                [
                    self.coord(idx % n),
                    self.coord((idx / n) % n),
                    self.coord(idx / (n * n)),
                ]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSpaceGrid {
    pub x: SpatialGrid,
    pub v: VelocityGrid,
}

impl PhaseSpaceGrid {
    pub fn new(x: SpatialGrid, v: VelocityGrid) -> Self {
        Self { x, v }
    }

    pub fn homogeneous(v: VelocityGrid) -> Self {
        Self {
            x: SpatialGrid::homogeneous(),
            v,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Phase-space cell measure Δx^dim · h³.
    pub fn cell_measure(&self) -> f64 {
        self.x.cell_measure() * self.v.cell_volume()
    }
}

/// Samples of f(t, x, v), stored x-major: `values[ix * n_v + iv]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionField {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<f64>,
    pub time: f64,
    pub nonneg_asserted: bool,
}

impl DistributionField {
    pub fn zeros(grid: PhaseSpaceGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            time: 0.0,
            nonneg_asserted: false,
        }
    }

    pub fn from_fn(grid: PhaseSpaceGrid, f: impl Fn(Vec3, Vec3) -> f64) -> Self {
        let nv = grid.v.len();
        let vnodes = grid.v.nodes();
        let mut values = Vec::with_capacity(grid.len());
        for ix in 0..grid.x.len() {
            let x = grid.x.node(ix);
            for v in vnodes.iter().take(nv) {
                values.push(f(x, *v));
            }
        }
        Self {
            grid,
            values,
            time: 0.0,
            nonneg_asserted: false,
        }
    }

    pub fn from_values(grid: PhaseSpaceGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KweError::domain(format!(
                "field has {} values, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            time,
            nonneg_asserted: false,
        })
    }

    pub fn n_v(&self) -> usize {
        self.grid.v.len()
    }

    pub fn slice(&self, ix: usize) -> &[f64] {
        let nv = self.n_v();
        &self.values[ix * nv..(ix + 1) * nv]
    }

    pub fn slice_mut(&mut self, ix: usize) -> &mut [f64] {
        let nv = self.n_v();
        &mut self.values[ix * nv..(ix + 1) * nv]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(KweError::domain("fields live on different grids"));
        }
        Ok(())
    }

    /// self + a·other, keeping self's time stamp.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        Self {
            grid: self.grid,
            values,
            time: self.time,
            nonneg_asserted: false,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|x| a * x).collect(),
            time: self.time,
            nonneg_asserted: false,
        }
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Multiply every v-node by ⟨v⟩^power.
    pub fn weighted(&self, power: f64) -> Self {
        let w = self.grid.v.bracket_powers(power);
        let nv = w.len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, x)| x * w[i % nv])
            .collect();
        Self {
            grid: self.grid,
            values,
            time: self.time,
            nonneg_asserted: false,
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.values.iter().position(|x| !x.is_finite()) {
            return Err(KweError::Instability {
                time: self.time,
                message: format!("non-finite value at flat index {i}"),
            });
        }
        Ok(())
    }
}

/// Exponents ≥ 1 of a mixed norm L^p_x L^r_v; `f64::INFINITY` for the sup norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedExponents {
    pub p_x: f64,
    pub r_v: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L1Xv,
    LinfXv,
    LinfxL2v,
    L2xL1v,
}

impl NormKind {
    pub fn exponents(self) -> MixedExponents {
        let (p_x, r_v) = match self {
            NormKind::L1Xv => (1.0, 1.0),
            NormKind::LinfXv => (f64::INFINITY, f64::INFINITY),
            NormKind::LinfxL2v => (f64::INFINITY, 2.0),
            NormKind::L2xL1v => (2.0, 1.0),
        };
        MixedExponents { p_x, r_v }
    }
}

impl FromStr for NormKind {
    type Err = KweError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L1_xv" => Ok(NormKind::L1Xv),
            "Linf_xv" => Ok(NormKind::LinfXv),
            "Linfx_L2v" => Ok(NormKind::LinfxL2v),
            "L2x_L1v" => Ok(NormKind::L2xL1v),
            other => Err(KweError::config(
                "norm_kind",
                format!("unknown norm kind `{other}`"),
            )),
        }
    }
}

fn lp_accumulate(values: impl Iterator<Item = f64>, p: f64, measure: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, |m, x| m.max(x.abs()))
    } else if p == 1.0 {
        values.map(f64::abs).sum::<f64>() * measure
    } else if p == 2.0 {
        (values.map(|x| x * x).sum::<f64>() * measure).sqrt()
    } else {
        (values.map(|x| x.abs().powf(p)).sum::<f64>() * measure).powf(1.0 / p)
    }
}

/// ‖⟨v⟩^l f‖_{L^p_x L^r_v}: inner norm per x-node first, then the outer norm
/// over x, both as Riemann sums with cell measures.
pub fn mixed_norm(f: &DistributionField, weight_power: f64, e: MixedExponents) -> f64 {
    let w = f.grid.v.bracket_powers(weight_power);
    let hv = f.grid.v.cell_volume();
    let dx = f.grid.x.cell_measure();
    let inner: Vec<f64> = (0..f.grid.x.len())
        .map(|ix| {
            let s = f.slice(ix);
            lp_accumulate(s.iter().zip(&w).map(|(a, b)| a * b), e.r_v, hv)
        })
        .collect();
    lp_accumulate(inner.into_iter(), e.p_x, dx)
}

pub fn weighted_norm(f: &DistributionField, weight_power: f64, kind: NormKind) -> f64 {
    mixed_norm(f, weight_power, kind.exponents())
}

/// Weight exponents of the X_{M,α} norm: M > 8, 5/2 < α < M − 3/2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightParams {
    pub m: f64,
    pub alpha: f64,
    pub n_moment: f64,
}

impl WeightParams {
    pub fn new(m: f64, alpha: f64, n_moment: f64) -> Result<Self> {
        if !(m > 8.0) {
            return Err(KweError::config(
                "weights.M",
                format!("WeightParams requires M > 8, got {m}"),
            ));
        }
        if !(alpha > 2.5 && alpha < m - 1.5) {
            return Err(KweError::config(
                "weights.alpha",
                format!("WeightParams requires 5/2 < alpha < M - 3/2, got alpha = {alpha}, M = {m}"),
            ));
        }
        if !(n_moment >= 0.0) {
            return Err(KweError::config(
                "weights.N_moment",
                "WeightParams requires N_moment >= 0",
            ));
        }
        Ok(Self { m, alpha, n_moment })
    }
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            m: 9.0,
            alpha: 3.0,
            n_moment: 2.0,
        }
    }
}

/// Product rule on S²: Gauss–Legendre in z = cos θ, uniform in φ.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    n_polar: usize,
    n_azimuthal: usize,
}

/// Gauss–Legendre nodes (ascending) and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n % 2 == 1 && i == m - 1 {
            z = 0.0;
            // derivative of P_n at 0 for the middle node
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

impl SphereQuadrature {
    pub fn new(n_polar: usize, n_azimuthal: usize) -> Result<Self> {
        if n_polar < 2 {
            return Err(KweError::config("grid.n_polar", "must be >= 2"));
        }
        if n_azimuthal < 4 || n_azimuthal % 2 == 1 {
            return Err(KweError::config(
                "grid.n_azimuthal",
                format!("must be even and >= 4, got {n_azimuthal}"),
            ));
        }
        let (z, wz) = gauss_legendre(n_polar);
        let dphi = 2.0 * PI / n_azimuthal as f64;
        let mut nodes = Vec::with_capacity(n_polar * n_azimuthal);
        let mut weights = Vec::with_capacity(n_polar * n_azimuthal);
        for (zi, wi) in z.iter().zip(&wz) {
            let s = (1.0 - zi * zi).max(0.0).sqrt();
            for k in 0..n_azimuthal {
                // half-offset keeps the antipode of node k at node k + n/2
                let phi = (k as f64 + 0.5) * dphi;
                let (sp, cp) = phi.sin_cos();
                nodes.push([s * cp, s * sp, *zi]);
                weights.push(wi * dphi);
            }
        }
        // make antipodes exact negatives of each other
        let mut q = Self {
            nodes,
            weights,
            n_polar,
            n_azimuthal,
        };
        for j in 0..q.len() {
            let a = q.antipode(j);
            if j < a {
                let s = q.nodes[j];
                q.nodes[a] = [-s[0], -s[1], -s[2]];
                q.weights[a] = q.weights[j];
            }
        }
        Ok(q)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_polar(&self) -> usize {
        self.n_polar
    }

    pub fn n_azimuthal(&self) -> usize {
        self.n_azimuthal
    }

    /// Highest spherical-polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        (2 * self.n_polar - 1).min(self.n_azimuthal - 1)
    }

    pub fn antipode(&self, j: usize) -> usize {
        let ip = j / self.n_azimuthal;
        let ia = j % self.n_azimuthal;
        (self.n_polar - 1 - ip) * self.n_azimuthal + (ia + self.n_azimuthal / 2) % self.n_azimuthal
    }

    /// One representative per antipodal pair, as (node, weight).
    pub fn half_pairs(&self) -> Vec<(Vec3, f64)> {
        (0..self.len())
            .filter(|&j| j < self.antipode(j))
            .map(|j| (self.nodes[j], self.weights[j]))
            .collect()
    }

    pub fn integrate(&self, f: impl Fn(Vec3) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * f(*s))
            .sum()
    }
}

/// Trilinear interpolation of a v-slice; zero outside [−v_max, v_max]³.
#[inline]
pub fn interpolate_velocity(slice: &[f64], grid: &VelocityGrid, v: Vec3) -> f64 {
    let inv_h = 1.0 / grid.spacing();
    interpolate_scaled(
        slice,
        grid.n,
        (v[0] + grid.v_max) * inv_h,
        (v[1] + grid.v_max) * inv_h,
        (v[2] + grid.v_max) * inv_h,
    )
}

/// Lattice coordinates this close to a face count as on it. Post-collision
/// velocities land on the faces exactly in real arithmetic, and without the
/// snap the zero extension would be decided by the last bit, which breaks the
/// v → −v symmetry of the discrete operator.
const FACE_TOL: f64 = 1e-10;

#[inline(always)]
fn snap_to_box(c: f64, top: f64) -> Option<f64> {
    if c >= 0.0 && c <= top {
        Some(c)
    } else if c >= -FACE_TOL && c <= top + FACE_TOL {
        Some(c.clamp(0.0, top))
    } else {
        None
    }
}

/// Trilinear interpolation in lattice units (node i sits at coordinate i).
#[inline(always)]
pub(crate) fn interpolate_scaled(slice: &[f64], n: usize, cx: f64, cy: f64, cz: f64) -> f64 {
    let top = (n - 1) as f64;
    let (Some(cx), Some(cy), Some(cz)) = (snap_to_box(cx, top), snap_to_box(cy, top), snap_to_box(cz, top)) else {
        return 0.0;
    };
    let last = n - 2;
    let ix = (cx as usize).min(last);
    let iy = (cy as usize).min(last);
    let iz = (cz as usize).min(last);
    let tx = cx - ix as f64;
    let ty = cy - iy as f64;
    let tz = cz - iz as f64;
    let base = (iz * n + iy) * n + ix;
    let nn = n * n;
    // one range check covers all eight corners
    let cell = &slice[base..base + nn + n + 2];
    let c000 = cell[0];
    let c100 = cell[1];
    let c010 = cell[n];
    let c110 = cell[n + 1];
    let c001 = cell[nn];
    let c101 = cell[nn + 1];
    let c011 = cell[nn + n];
    let c111 = cell[nn + n + 1];
    let (sx, sy, sz) = (1.0 - tx, 1.0 - ty, 1.0 - tz);
    let c00 = sx * c000 + tx * c100;
    let c10 = sx * c010 + tx * c110;
    let c01 = sx * c001 + tx * c101;
    let c11 = sx * c011 + tx * c111;
    let c0 = sy * c00 + ty * c10;
    let c1 = sy * c01 + ty * c11;
    sz * c0 + tz * c1
}

/// Tricubic counterpart of [`interpolate_velocity`]; needs at least four
/// nodes per axis.
pub fn interpolate_velocity_cubic(slice: &[f64], grid: &VelocityGrid, v: Vec3) -> f64 {
    let inv_h = 1.0 / grid.spacing();
    interpolate_cubic_scaled(
        slice,
        grid.n,
        (v[0] + grid.v_max) * inv_h,
        (v[1] + grid.v_max) * inv_h,
        (v[2] + grid.v_max) * inv_h,
    )
}

/// Four-point Lagrange weights on nodes i0..i0+3 at lattice coordinate c.
#[inline(always)]
fn lagrange4(c: f64, n: usize) -> (usize, [f64; 4]) {
    let i0 = ((c.floor() as i64) - 1).clamp(0, n as i64 - 4) as usize;
    let t = c - i0 as f64;
    let (a, b, d, e) = (t, t - 1.0, t - 2.0, t - 3.0);
    (
        i0,
        [
            -b * d * e / 6.0,
            a * d * e / 2.0,
            -a * b * e / 2.0,
            a * b * d / 6.0,
        ],
    )
}

/// Tricubic Lagrange interpolation in lattice units; zero outside the box.
/// Needs n ≥ 4. Stencils are shifted inward at the faces.
#[inline(always)]
pub(crate) fn interpolate_cubic_scaled(slice: &[f64], n: usize, cx: f64, cy: f64, cz: f64) -> f64 {
    let top = (n - 1) as f64;
    let (Some(cx), Some(cy), Some(cz)) = (snap_to_box(cx, top), snap_to_box(cy, top), snap_to_box(cz, top)) else {
        return 0.0;
    };
    let (ix, wx) = lagrange4(cx, n);
    let (iy, wy) = lagrange4(cy, n);
    let (iz, wz) = lagrange4(cz, n);
    let mut out = 0.0;
    for (kz, wz) in wz.iter().enumerate() {
        let mut plane = 0.0;
        for (ky, wy) in wy.iter().enumerate() {
            let row = &slice[((iz + kz) * n + iy + ky) * n + ix..][..4];
            plane += wy * (wx[0] * row[0] + wx[1] * row[1] + wx[2] * row[2] + wx[3] * row[3]);
        }
        out += wz * plane;
    }
    out
}
