//! Run configuration read from a TOML file with sections [grid], [solver],
//! [weights], [initial] and [output]. Unknown sections and keys are rejected.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::{KweError, Result};
use crate::phase_grid::{PhaseSpaceGrid, SpatialGrid, SphereQuadrature, VelocityGrid, WeightParams};
use crate::solver::SolverConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct InitialParams {
    pub amplitude: f64,
    pub s_x: f64,
    pub s_v: f64,
    pub r_x: f64,
    pub r_v: f64,
    pub beta: f64,
    pub mu: f64,
}

impl Default for InitialParams {
    fn default() -> Self {
        Self {
            amplitude: 0.01,
            s_x: 1.0,
            s_v: 1.0,
            r_x: 2.0,
            r_v: 2.0,
            beta: 1.0,
            mu: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub grid: PhaseSpaceGrid,
    pub n_polar: usize,
    pub n_azimuthal: usize,
    pub solver: SolverConfig,
    pub seed: u64,
    pub initial_name: String,
    pub initial: InitialParams,
    pub output_dir: PathBuf,
    pub write_snapshots: bool,
}

impl RunConfig {
    pub fn quadrature(&self) -> Result<SphereQuadrature> {
        SphereQuadrature::new(self.n_polar, self.n_azimuthal)
    }
}

/// Typed access to one section that remembers which keys were consumed.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    seen: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str) -> Result<Self> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(KweError::config(name, "expected a section")),
        };
        Ok(Self {
            name,
            table,
            seen: Vec::new(),
        })
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.table.and_then(|t| t.get(key))
    }

    fn f64(&mut self, key: &'static str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Float(x)) => Ok(*x),
            Some(Value::Integer(i)) => Ok(*i as f64),
            Some(other) => Err(KweError::config(
                self.path(key),
                format!("expected a number, got {}", other.type_str()),
            )),
        }
    }

    fn usize(&mut self, key: &'static str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(Value::Integer(i)) => Err(KweError::config(
                self.path(key),
                format!("must be non-negative, got {i}"),
            )),
            Some(other) => Err(KweError::config(
                self.path(key),
                format!("expected an integer, got {}", other.type_str()),
            )),
        }
    }

    fn bool(&mut self, key: &'static str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(other) => Err(KweError::config(
                self.path(key),
                format!("expected a boolean, got {}", other.type_str()),
            )),
        }
    }

    fn string(&mut self, key: &'static str, default: &str) -> Result<String> {
        match self.raw(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(KweError::config(
                self.path(key),
                format!("expected a string, got {}", other.type_str()),
            )),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(t) = self.table {
            if let Some(k) = t.keys().find(|k| !self.seen.contains(&k.as_str())) {
                return Err(KweError::config(self.path(k), "unknown key"));
            }
        }
        Ok(())
    }
}

const SECTIONS: [&str; 5] = ["grid", "solver", "weights", "initial", "output"];

/// Parse configuration text. Relative output directories are resolved
/// against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| KweError::config("<file>", e.to_string()))?;
    if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(KweError::config(k.as_str(), "unknown section"));
    }

    let mut g = Section::new(&root, "grid")?;
    let v_max = g.f64("v_max", 4.0)?;
    let n_v = g.usize("n_v", 9)?;
    let dim_x = g.usize("dim_x", 0)?;
    let x_max = g.f64("x_max", 8.0)?;
    let n_x = g.usize("n_x", 16)?;
    let n_polar = g.usize("n_polar", 6)?;
    let n_azimuthal = g.usize("n_azimuthal", 12)?;
    g.finish()?;
    let grid = PhaseSpaceGrid::new(
        SpatialGrid::new(dim_x, x_max, n_x)?,
        VelocityGrid::new(v_max, n_v)?,
    );
    SphereQuadrature::new(n_polar, n_azimuthal)?;

    let d = SolverConfig::default();
    let mut w = Section::new(&root, "weights")?;
    let weights = WeightParams::new(
        w.f64("M", d.weights.m)?,
        w.f64("alpha", d.weights.alpha)?,
        w.f64("N_moment", d.weights.n_moment)?,
    )?;
    let epsilon0_budget = w.f64("epsilon0_budget", d.epsilon0_budget)?;
    w.finish()?;
    if !(epsilon0_budget > 0.0) {
        return Err(KweError::config("weights.epsilon0_budget", "must be > 0"));
    }

    let mut s = Section::new(&root, "solver")?;
    let solver = SolverConfig {
        t_end: s.f64("t_end", d.t_end)?,
        dt: s.f64("dt", d.dt)?,
        snapshot_stride: s.usize("snapshot_stride", d.snapshot_stride)?,
        picard_tol: s.f64("picard_tol", d.picard_tol)?,
        picard_max_iter: s.usize("picard_max_iter", d.picard_max_iter)?,
        gain_only: s.bool("gain_only", d.gain_only)?,
        weights,
        epsilon0_budget,
        boundary_budget: s.f64("boundary_budget", d.boundary_budget)?,
        picard_horizon: s.f64("picard_horizon", d.picard_horizon)?,
        ks_tol: s.f64("ks_tol", d.ks_tol)?,
        ks_max_iter: s.usize("ks_max_iter", d.ks_max_iter)?,
        ks_nesting_tol: s.f64("ks_nesting_tol", d.ks_nesting_tol)?,
        reduce: d.reduce,
    };
    let seed = s.usize("seed", 0)? as u64;
    s.finish()?;
    solver.validate()?;

    let mut i = Section::new(&root, "initial")?;
    let di = InitialParams::default();
    let initial_name = i.string("name", "gaussian")?;
    let initial = InitialParams {
        amplitude: i.f64("amplitude", di.amplitude)?,
        s_x: i.f64("s_x", di.s_x)?,
        s_v: i.f64("s_v", di.s_v)?,
        r_x: i.f64("r_x", di.r_x)?,
        r_v: i.f64("r_v", di.r_v)?,
        beta: i.f64("beta", di.beta)?,
        mu: i.f64("mu", di.mu)?,
    };
    i.finish()?;
    for (key, val) in [
        ("initial.s_x", initial.s_x),
        ("initial.s_v", initial.s_v),
        ("initial.r_x", initial.r_x),
        ("initial.r_v", initial.r_v),
        ("initial.beta", initial.beta),
        ("initial.mu", initial.mu),
    ] {
        if !(val > 0.0 && val.is_finite()) {
            return Err(KweError::config(key, "must be a positive scale"));
        }
    }
    if !initial.amplitude.is_finite() {
        return Err(KweError::config("initial.amplitude", "must be finite"));
    }

    let mut o = Section::new(&root, "output")?;
    let dir = PathBuf::from(o.string("dir", "out")?);
    let write_snapshots = o.bool("snapshots", false)?;
    o.finish()?;

    Ok(RunConfig {
        grid,
        n_polar,
        n_azimuthal,
        solver,
        seed,
        initial_name,
        initial,
        output_dir: if dir.is_absolute() { dir } else { base.join(dir) },
        write_snapshots,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        KweError::config(path.display().to_string(), format!("cannot read: {e}"))
    })?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}
