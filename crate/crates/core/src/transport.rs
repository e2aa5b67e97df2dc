//! Free transport S(t)f(x, v) = f(x − vt, v) as an exact per-velocity shift
//! of each x-slice, with linear (dim 1) or trilinear (dim 3) interpolation and
//! zero inflow.

use rayon::prelude::*;

use crate::collision::Compensated;
use crate::error::{KweError, Result};
use crate::phase_grid::{mixed_norm, DistributionField, MixedExponents};

/// Shift of a slice in lattice units: source position = target − (k + θ).
#[derive(Clone, Copy, Debug)]
struct Shift {
    k: i64,
    theta: f64,
}

impl Shift {
    fn new(cells: f64) -> Self {
        let k = cells.floor();
        Shift {
            k: k as i64,
            theta: cells - k,
        }
    }
}

/// Result of a transport application with the mass that left the box.
#[derive(Clone, Debug)]
pub struct Transported {
    pub field: DistributionField,
    pub boundary_mass_lost: f64,
}

pub fn apply_transport(f: &DistributionField, t: f64) -> DistributionField {
    transport_values(f, t).with_time(f.time + t)
}

/// S(t)f together with Σ(f − S(t)f)·cell measure.
pub fn apply_transport_tracked(f: &DistributionField, t: f64) -> Transported {
    let out = apply_transport(f, t);
    let mut before = Compensated::default();
    let mut after = Compensated::default();
    for (a, b) in f.values.iter().zip(&out.values) {
        before.add(*a);
        after.add(-*b);
    }
    let mut diff = before;
    diff.add(after.value());
    Transported {
        boundary_mass_lost: diff.value() * f.grid.cell_measure(),
        field: out,
    }
}

fn transport_values(f: &DistributionField, t: f64) -> DistributionField {
    let grid = f.grid;
    if grid.x.dim() == 0 || t == 0.0 {
        return DistributionField {
            grid,
            values: f.values.clone(),
            time: f.time,
            nonneg_asserted: f.nonneg_asserted,
        };
    }
    let nv = grid.v.len();
    let n = grid.x.n_per_axis() as i64;
    let dx = grid.x.spacing();
    let vnodes = grid.v.nodes();
    let mut out = vec![0.0; grid.len()];
    match grid.x.dim() {
        1 => {
            let shifts: Vec<Shift> = vnodes.iter().map(|v| Shift::new(v[0] * t / dx)).collect();
            out.par_chunks_mut(nv).enumerate().for_each(|(ix, row)| {
                for (iv, s) in shifts.iter().enumerate() {
                    let j0 = ix as i64 - s.k;
                    let j1 = j0 - 1;
                    let mut val = 0.0;
                    if (0..n).contains(&j0) {
                        val += (1.0 - s.theta) * f.values[j0 as usize * nv + iv];
                    }
                    if s.theta != 0.0 && (0..n).contains(&j1) {
                        val += s.theta * f.values[j1 as usize * nv + iv];
                    }
                    row[iv] = val;
                }
            });
        }
        _ => {
            let shifts: Vec<[Shift; 3]> = vnodes
                .iter()
                .map(|v| {
                    [
                        Shift::new(v[0] * t / dx),
                        Shift::new(v[1] * t / dx),
                        Shift::new(v[2] * t / dx),
                    ]
                })
                .collect();
            let nn = n as usize;
            out.par_chunks_mut(nv).enumerate().for_each(|(ix, row)| {
                let c = [
                    (ix % nn) as i64,
                    ((ix / nn) % nn) as i64,
                    (ix / (nn * nn)) as i64,
                ];
                for (iv, s) in shifts.iter().enumerate() {
                    let mut val = 0.0;
                    for corner in 0..8 {
                        let mut w = 1.0;
                        let mut idx = 0usize;
                        let mut inside = true;
                        for axis in (0..3).rev() {
                            let back = (corner >> axis) & 1 == 1;
                            let th = s[axis].theta;
                            let wa = if back { th } else { 1.0 - th };
                            if wa == 0.0 {
                                inside = false;
                                break;
                            }
                            let j = c[axis] - s[axis].k - back as i64;
                            if !(0..n).contains(&j) {
                                inside = false;
                                break;
                            }
                            w *= wa;
                            idx = idx * nn + j as usize;
                        }
                        if inside {
                            val += w * f.values[idx * nv + iv];
                        }
                    }
                    row[iv] = val;
                }
            });
        }
    }
    DistributionField {
        grid,
        values: out,
        time: f.time,
        nonneg_asserted: f.nonneg_asserted,
    }
}

/// max |⟨v⟩^l S(t)f − S(t)(⟨v⟩^l f)| over all nodes.
pub fn transport_commutes_with_weights_check(f: &DistributionField, t: f64, l: f64) -> f64 {
    let a = apply_transport(f, t).weighted(l);
    let b = apply_transport(&f.weighted(l), t);
    a.values
        .iter()
        .zip(&b.values)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Mixed norms of S(t)f₀ at the sampled times and the fitted log-log slope.
#[derive(Clone, Debug)]
pub struct DecayProbe {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
}

pub fn dispersive_decay_probe(
    f0: &DistributionField,
    times: &[f64],
    p: f64,
    r: f64,
) -> Result<DecayProbe> {
    if f0.grid.x.dim() == 0 {
        return Err(KweError::domain("dispersive_decay_probe needs dim >= 1"));
    }
    if times.len() < 2 || times.iter().any(|&t| !(t > 0.0)) {
        return Err(KweError::domain(
            "dispersive_decay_probe needs at least two positive times",
        ));
    }
    let abs0 = DistributionField {
        values: f0.values.iter().map(|x| x.abs()).collect(),
        ..f0.clone()
    };
    let mass0: f64 = abs0.values.iter().sum::<f64>() * f0.grid.cell_measure();
    let e = MixedExponents { p_x: p, r_v: r };
    let mut norms = Vec::with_capacity(times.len());
    for &t in times {
        let lost = apply_transport_tracked(&abs0, t).boundary_mass_lost;
        if lost > 1e-8 * mass0 {
            return Err(KweError::domain(format!(
                "support leaves the spatial box at t = {t} (lost mass fraction {:.3e})",
                lost / mass0
            )));
        }
        norms.push(mixed_norm(&apply_transport(f0, t), 0.0, e));
    }
    let slope = crate::diagnostics::loglog_slope(times, &norms)?.slope;
    Ok(DecayProbe {
        times: times.to_vec(),
        norms,
        slope,
    })
}
