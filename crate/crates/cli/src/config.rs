//! Run configuration assembled from the command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use serde::Serialize;
use toric_core::io::read_polygon;
use toric_core::quadrature::{default_h, DEFAULT_B};
use toric_core::solver::SolverConfig;
use toric_core::{Error, Polygon, Result};

#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    /// Preset name (pentagon, hexagon, heptagon, octagon, triangle, square) or a polygon JSON file.
    #[arg(long, default_value = "hexagon")]
    pub polygon: String,
    /// Scale factor applied to the base polygon; a decimal or a fraction such as 2/3.
    #[arg(long, default_value = "1", conflicts_with = "k")]
    pub k_scale: String,
    /// Bounding square side, as an alternative to --k-scale.
    #[arg(long)]
    pub k: Option<i64>,
    /// Quadrature grid spacing; defaults to k/60.
    #[arg(allow_negative_numbers = true, long)]
    pub h: Option<f64>,
    #[arg(allow_negative_numbers = true, long, default_value_t = DEFAULT_B)]
    pub b: f64,
    #[arg(allow_negative_numbers = true, long, default_value_t = 0.75)]
    pub c: f64,
    #[arg(allow_negative_numbers = true, long, default_value_t = 0.0008)]
    pub c_prime: f64,
    #[arg(allow_negative_numbers = true, long)]
    pub eta_tol: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    pub outer_cap: usize,
    /// Relative weight below which lattice terms are dropped.
    #[arg(allow_negative_numbers = true, long, default_value_t = toric_core::potential::DEFAULT_TRUNCATION)]
    pub truncation: f64,
    /// Average over the lattice symmetries of the polygon after every step.
    #[arg(long)]
    pub symmetry: bool,
    /// Finite-difference step for the Bach tensor.
    #[arg(allow_negative_numbers = true, long, default_value_t = 1e-3)]
    pub fd_step: f64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Checkpoint directory (or one of its files) to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

/// Validated configuration, echoed to `config.json` in the output directory.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub polygon: String,
    pub k: i64,
    pub vertices: Vec<[i64; 2]>,
    pub h: f64,
    pub b: f64,
    pub solver: SolverConfig,
    pub fd_step: f64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub resume: Option<PathBuf>,
    #[serde(skip)]
    pub shape: Arc<Polygon>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_scale(s: &str) -> Result<f64> {
    let bad = || config_err(format!("cannot parse scale factor `{s}`"));
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| bad())?;
            let d: f64 = d.trim().parse().map_err(|_| bad())?;
            n / d
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if !(v > 0.0 && v.is_finite()) {
        return Err(config_err(format!("scale factor must be positive, got {s}")));
    }
    Ok(v)
}

/// Base polygon for a preset name or JSON path.
pub fn base_polygon(source: &str) -> Result<Polygon> {
    match source {
        "triangle" => Polygon::named("triangle", vec![[0, 0], [1, 0], [0, 1]], 1),
        "square" => Polygon::named("square", vec![[0, 0], [1, 0], [1, 1], [0, 1]], 1),
        s if Path::new(s).is_file() => read_polygon(Path::new(s)),
        s => Polygon::preset(s),
    }
}

/// Base polygon brought to side `k` (or scaled by `scale`).
pub fn resolve_polygon(source: &str, scale: &str, k: Option<i64>) -> Result<Polygon> {
    let base = base_polygon(source)?;
    let k = match k {
        Some(k) => k,
        None => {
            let target = base.k() as f64 * parse_scale(scale)?;
            let r = target.round();
            if (target - r).abs() > 1e-9 || r < 1.0 {
                return Err(config_err(format!(
                    "scale {scale} takes k = {} to the non-integral {target}",
                    base.k()
                )));
            }
            r as i64
        }
    };
    if k == base.k() {
        Ok(base)
    } else {
        base.rescaled_to(k)
    }
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let shape = Arc::new(resolve_polygon(&self.polygon, &self.k_scale, self.k)?);
        self.resolve_with(shape)
    }

    pub fn resolve_with(&self, shape: Arc<Polygon>) -> Result<RunConfig> {
        let h = self.h.unwrap_or_else(|| default_h(&shape));
        for (name, v) in [("h", h), ("b", self.b), ("fd-step", self.fd_step)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("--{name} must be positive, got {v}")));
            }
        }
        if self.threads == Some(0) {
            return Err(config_err("--threads must be at least 1"));
        }
        let solver = SolverConfig {
            c: self.c,
            c_prime: self.c_prime,
            eta_tol: self.eta_tol,
            outer_cap: self.outer_cap,
            truncation: self.truncation,
            symmetry: self.symmetry,
            ..SolverConfig::default()
        };
        solver.validate()?;
        Ok(RunConfig {
            polygon: shape.name().to_string(),
            k: shape.k(),
            vertices: shape.vertices().to_vec(),
            h,
            b: self.b,
            solver,
            fd_step: self.fd_step,
            threads: self.threads,
            out: self.out.clone(),
            resume: self.resume.clone(),
            shape,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractional_scales() {
        assert_eq!(resolve_polygon("hexagon", "2/3", None).unwrap().k(), 4);
        assert_eq!(resolve_polygon("hexagon", "1", Some(10)).unwrap().k(), 10);
        assert_eq!(resolve_polygon("pentagon", "3", None).unwrap().k(), 6);
        assert!(matches!(resolve_polygon("pentagon", "1.5", None), Err(Error::Config(_))));
        assert!(matches!(resolve_polygon("hexagon", "1/4", None), Err(Error::Config(_))));
        assert!(matches!(resolve_polygon("nonagon", "1", None), Err(Error::UnknownPreset(_))));
    }
}
