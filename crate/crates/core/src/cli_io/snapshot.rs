//! Binary snapshot: `KWE1`, u32 dim_x, n_x, n_v, f64 v_max, x_max, time, then
//! the values x-major (v lexicographic, x fastest), all little-endian.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{KweError, Result};
use crate::phase_grid::{DistributionField, PhaseSpaceGrid, SpatialGrid, VelocityGrid};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"KWE1";

pub fn encode_snapshot(f: &DistributionField) -> Vec<u8> {
    let mut buf = Vec::with_capacity(40 + 8 * f.values.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&(f.grid.x.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(f.grid.x.n_per_axis() as u32).to_le_bytes());
    buf.extend_from_slice(&(f.grid.v.n_per_axis() as u32).to_le_bytes());
    buf.extend_from_slice(&f.grid.v.v_max().to_le_bytes());
    buf.extend_from_slice(&f.grid.x.x_max().to_le_bytes());
    buf.extend_from_slice(&f.time.to_le_bytes());
    for v in &f.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<DistributionField> {
    if bytes.len() < 40 {
        return Err(KweError::Format("snapshot shorter than its header".into()));
    }
    if &bytes[0..4] != SNAPSHOT_MAGIC {
        return Err(KweError::Format(format!(
            "bad snapshot magic {:?}, expected KWE1",
            &bytes[0..4]
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (dim, n_x, n_v) = (u32_at(4), u32_at(8), u32_at(12));
    let (v_max, x_max, time) = (f64_at(16), f64_at(24), f64_at(32));
    let bad = |e: KweError| KweError::Format(format!("snapshot header: {e}"));
    let v = VelocityGrid::new(v_max, n_v).map_err(bad)?;
    let x = SpatialGrid::new(dim, x_max, n_x).map_err(bad)?;
    let grid = PhaseSpaceGrid::new(x, v);
    let expected = 40 + 8 * grid.len();
    if bytes.len() != expected {
        return Err(KweError::Format(format!(
            "snapshot has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let values = bytes[40..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DistributionField::from_values(grid, values, time)
}

pub fn write_snapshot(path: &Path, f: &DistributionField) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode_snapshot(f))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<DistributionField> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes)
}
