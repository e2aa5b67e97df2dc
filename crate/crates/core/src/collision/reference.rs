//! Closed-form quantities used as oracles for the quadrature kernels.

use std::f64::consts::PI;

use crate::error::{KweError, Result};
use crate::phase_grid::{dot, norm, SphereQuadrature, Vec3};

/// F(v, v₁) = |u|^γ ∫_{S²} ⟨v*⟩^{−3} dσ in closed form.
///
/// With u = v − v₁, V = (v + v₁)/2, E = |v|² + |v₁|², one has
/// |v*|² = E/2 + |u||V| z where z is the cosine between σ and V, so
///
/// ```text
/// I = 2π ∫_{−1}^{1} (A + B z)^{−3/2} dz = (4π/B) [(A − B)^{−1/2} − (A + B)^{−1/2}]
/// ```
///
/// with A = 1 + E/2 and B = |u||V| (note A − B ≥ 1). For B < 1e−8 the limit
/// 4π A^{−3/2} is used. The bracket is evaluated as
/// 2B / (√(A−B)√(A+B)(√(A+B) + √(A−B))) to avoid cancellation at small B.
pub fn angular_average_reference(v: Vec3, v1: Vec3, gamma: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&gamma) {
        return Err(KweError::domain(format!(
            "gamma must lie in [0, 2], got {gamma}"
        )));
    }
    let u = [v[0] - v1[0], v[1] - v1[1], v[2] - v1[2]];
    let mid = [0.5 * (v[0] + v1[0]), 0.5 * (v[1] + v1[1]), 0.5 * (v[2] + v1[2])];
    let e = dot(v, v) + dot(v1, v1);
    let a = 1.0 + 0.5 * e;
    let b = norm(u) * norm(mid);
    let integral = if b < 1e-8 {
        4.0 * PI * a.powf(-1.5)
    } else {
        let (lo, hi) = ((a - b).sqrt(), (a + b).sqrt());
        8.0 * PI / (lo * hi * (lo + hi))
    };
    let ru = norm(u);
    let weight = if gamma == 0.0 { 1.0 } else { ru.powf(gamma) };
    Ok(weight * integral)
}

/// The same quantity by direct quadrature over the sphere.
pub fn angular_average_quadrature(v: Vec3, v1: Vec3, gamma: f64, q: &SphereQuadrature) -> f64 {
    let u = [v[0] - v1[0], v[1] - v1[1], v[2] - v1[2]];
    let r = norm(u);
    let weight = if gamma == 0.0 { 1.0 } else { r.powf(gamma) };
    let mid = [0.5 * (v[0] + v1[0]), 0.5 * (v[1] + v1[1]), 0.5 * (v[2] + v1[2])];
    weight
        * q.integrate(|s| {
            let vs = [
                mid[0] + 0.5 * r * s[0],
                mid[1] + 0.5 * r * s[1],
                mid[2] + 0.5 * r * s[2],
            ];
            (1.0 + dot(vs, vs)).powf(-1.5)
        })
}

/// R_σ(u) = u/2 + |u|/2·σ.
pub fn r_sigma(u: Vec3, sigma: Vec3) -> Vec3 {
    let r = 0.5 * norm(u);
    [
        0.5 * u[0] + r * sigma[0],
        0.5 * u[1] + r * sigma[1],
        0.5 * u[2] + r * sigma[2],
    ]
}

fn require_half_space(nu: Vec3, sigma: Vec3) -> Result<f64> {
    let s = dot(nu, sigma);
    if !(s > 0.0) {
        return Err(KweError::domain(format!(
            "R_sigma is only invertible on nu·sigma > 0, got {s}"
        )));
    }
    Ok(s)
}

/// Inverse of R_σ on {ν·σ > 0}: u = 2ν − |ν|²/(σ·ν)·σ.
pub fn r_sigma_inverse(nu: Vec3, sigma: Vec3) -> Result<Vec3> {
    let s = require_half_space(nu, sigma)?;
    let c = dot(nu, nu) / s;
    Ok([
        2.0 * nu[0] - c * sigma[0],
        2.0 * nu[1] - c * sigma[1],
        2.0 * nu[2] - c * sigma[2],
    ])
}

/// Jacobian of the inverse map, 4|ν|²/(σ·ν)².
pub fn r_sigma_jacobian(nu: Vec3, sigma: Vec3) -> Result<f64> {
    let s = require_half_space(nu, sigma)?;
    Ok(4.0 * dot(nu, nu) / (s * s))
}
