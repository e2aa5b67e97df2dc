use super::config::InitialParams;
use crate::error::{KweError, Result};
use crate::phase_grid::{dot, DistributionField, PhaseSpaceGrid, Vec3};

/// exp(1 − 1/(1 − r²)) on r < 1, zero outside; peak value 1.
pub fn smooth_bump(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

fn spatial_gaussian(x: Vec3, s_x: f64, dim: usize) -> f64 {
    if dim == 0 {
        1.0
    } else {
        (-dot(x, x) / (2.0 * s_x * s_x)).exp()
    }
}

/// Named initial data sampled on the grid.
///
/// * `gaussian`: a·exp(−|x|²/2s_x²)·exp(−|v|²/2s_v²)
/// * `bump`: a·ψ(|x|/r_x)·ψ(|v|/r_v) with ψ the smooth compact bump
/// * `rayleigh_jeans_cutoff`: a/(β|v|² + μ) on the velocity box (times the
///   spatial Gaussian when dim ≥ 1)
pub fn initial_condition(
    name: &str,
    p: &InitialParams,
    grid: PhaseSpaceGrid,
) -> Result<DistributionField> {
    let dim = grid.x.dim();
    let a = p.amplitude;
    let mut f = match name {
        "gaussian" => DistributionField::from_fn(grid, |x, v| {
            a * spatial_gaussian(x, p.s_x, dim) * (-dot(v, v) / (2.0 * p.s_v * p.s_v)).exp()
        }),
        "bump" => DistributionField::from_fn(grid, |x, v| {
            let rx = if dim == 0 { 0.0 } else { dot(x, x).sqrt() / p.r_x };
            a * smooth_bump(rx) * smooth_bump(dot(v, v).sqrt() / p.r_v)
        }),
        "rayleigh_jeans_cutoff" => DistributionField::from_fn(grid, |x, v| {
            a * spatial_gaussian(x, p.s_x, dim) / (p.beta * dot(v, v) + p.mu)
        }),
        other => {
            return Err(KweError::config(
                "initial.name",
                format!("unknown initial condition `{other}` (gaussian, bump, rayleigh_jeans_cutoff)"),
            ))
        }
    };
    f.nonneg_asserted = a >= 0.0;
    Ok(f)
}
