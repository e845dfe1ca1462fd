//! Curvature fields on a uniform grid over the polygon and run summaries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{bach_tensor, CurvatureSample};
use crate::error::{Error, Result};
use crate::potential::{eval_jet, potential_value, Atlas, CoefficientSet, PotentialJet};
use crate::quadrature::QuadratureScheme;
use crate::solver::{error_measures_from_samples, ErrorMeasures};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
/// Largest tolerated share of grid points where the inversion fails.
pub const MAX_FAILURE_FRACTION: f64 = 1e-3;

/// Solves `Dφ(t) = x` by damped Newton iteration on `φ(t) - x·t`, seeded with
/// the centred gradient of the Guillemin potential.
pub fn invert_moment_map(coeffs: &CoefficientSet, atlas: &Atlas, x: [f64; 2]) -> Result<(PotentialJet, [f64; 2])> {
    let poly = coeffs.polygon();
    let shift = poly.guillemin(1.0, poly.centroid())?.gradient;
    let g0 = poly.guillemin(1.0, x).map_err(|_| Error::NewtonFailed(x))?.gradient;
    let mut t = [g0[0] - shift[0], g0[1] - shift[1]];
    let scale = poly.k() as f64;
    let objective = |t: [f64; 2]| -> Result<f64> { Ok(potential_value(coeffs, atlas, t)? - x[0] * t[0] - x[1] * t[1]) };
    let mut f = objective(t)?;
    for _ in 0..NEWTON_MAX_ITER {
        let jet = atlas.jet_at(coeffs, t, 0.0)?;
        let g = [jet.x[0] - x[0], jet.x[1] - x[1]];
        if g[0].hypot(g[1]) <= NEWTON_TOL * scale {
            return Ok((jet, t));
        }
        // Newton direction in original coordinates
        let m = atlas.charts[jet.chart].frame();
        let orig = jet.pulled_back(&m);
        let hi = orig.hess_inv;
        let d = [-(hi[0][0] * g[0] + hi[0][1] * g[1]), -(hi[1][0] * g[0] + hi[1][1] * g[1])];
        let slope = g[0] * d[0] + g[1] * d[1];
        let gnorm = g[0].hypot(g[1]);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let tn = [t[0] + step * d[0], t[1] + step * d[1]];
            if let (Ok(fn_), Ok(jn)) = (objective(tn), atlas.jet_at(coeffs, tn, 0.0)) {
                // close to the root f changes below its rounding level, so a
                // smaller gradient also counts as progress
                let gn = (jn.x[0] - x[0]).hypot(jn.x[1] - x[1]);
                if fn_ <= f + 1e-4 * step * slope || gn < 0.5 * gnorm {
                    t = tn;
                    f = fn_;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let jet = atlas.jet_at(coeffs, t, 0.0)?;
    let g = [jet.x[0] - x[0], jet.x[1] - x[1]];
    if g[0].hypot(g[1]) <= NEWTON_TOL * scale {
        return Ok((jet, t));
    }
    Err(Error::NewtonFailed(x))
}

/// One row of the field grid; curvature values refer to the metric rescaled to average `S = 1`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[allow(non_snake_case)]
pub struct FieldRow {
    pub x1: f64,
    pub x2: f64,
    pub S: f64,
    pub Shat: f64,
    pub K: f64,
    pub rho_norm: f64,
    pub w_norm: f64,
    pub riem_norm: f64,
    pub bach_norm: f64,
}

impl FieldRow {
    fn failed(x: [f64; 2]) -> Self {
        FieldRow {
            x1: x[0],
            x2: x[1],
            S: f64::NAN,
            Shat: f64::NAN,
            K: f64::NAN,
            rho_norm: f64::NAN,
            w_norm: f64::NAN,
            riem_norm: f64::NAN,
            bach_norm: f64::NAN,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FieldReport {
    pub rows: Vec<FieldRow>,
    pub failures: usize,
    pub lambda: f64,
}

/// Cell-centred points of spacing `spacing` lying strictly inside the polygon.
pub fn grid_points(coeffs: &CoefficientSet, spacing: f64) -> Vec<[f64; 2]> {
    let poly = coeffs.polygon();
    let v = poly.vertices();
    let (x0, x1) = (v.iter().map(|p| p[0]).min().unwrap(), v.iter().map(|p| p[0]).max().unwrap());
    let (y0, y1) = (v.iter().map(|p| p[1]).min().unwrap(), v.iter().map(|p| p[1]).max().unwrap());
    let nx = ((x1 - x0) as f64 / spacing).ceil() as i64;
    let ny = ((y1 - y0) as f64 / spacing).ceil() as i64;
    let margin = 1e-9 * poly.k() as f64;
    let mut pts = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let x = [x0 as f64 + (i as f64 + 0.5) * spacing, y0 as f64 + (j as f64 + 0.5) * spacing];
            if poly.min_edge_distance(x) > margin {
                pts.push(x);
            }
        }
    }
    pts
}

/// Samples the curvature on a uniform grid. `lambda` is the average scalar curvature used for rescaling.
pub fn field_grid(
    coeffs: &CoefficientSet,
    spacing: f64,
    fd_step: f64,
    lambda: f64,
    with_bach: bool,
) -> Result<FieldReport> {
    let atlas = Atlas::build(coeffs.polygon());
    let affine = coeffs.polygon().extremal_affine()?;
    let pts = grid_points(coeffs, spacing);
    let rows: Vec<Result<Option<FieldRow>>> = pts
        .par_iter()
        .map(|&x| {
            let (jet, _) = match invert_moment_map(coeffs, &atlas, x) {
                Ok(v) => v,
                Err(Error::NewtonFailed(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let c = CurvatureSample::with_affine(&jet, &affine).rescaled(lambda);
            let bach_norm = if with_bach {
                let chart = &atlas.charts[jet.chart];
                bach_tensor(coeffs, &atlas, chart, jet.t_chart, fd_step, 0.0)?.norm / (lambda * lambda)
            } else {
                f64::NAN
            };
            Ok(Some(FieldRow {
                x1: x[0],
                x2: x[1],
                S: c.scalar,
                Shat: c.s_hat,
                K: c.gauss,
                rho_norm: c.rho_norm,
                w_norm: c.w_norm,
                riem_norm: c.riem_norm(),
                bach_norm,
            }))
        })
        .collect();
    let mut out = Vec::with_capacity(rows.len());
    let mut failures = 0;
    for (r, x) in rows.into_iter().zip(&pts) {
        match r? {
            Some(row) => out.push(row),
            None => {
                failures += 1;
                out.push(FieldRow::failed(*x));
            }
        }
    }
    if failures as f64 > MAX_FAILURE_FRACTION * out.len() as f64 {
        return Err(Error::Parse(format!(
            "moment map inversion failed at {failures} of {} grid points",
            out.len()
        )));
    }
    Ok(FieldReport {
        rows: out,
        failures,
        lambda,
    })
}

/// Fields of the result tables, all after rescaling to average `S = 1`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub polygon: String,
    pub k: i64,
    pub vertices: usize,
    pub lattice_points: usize,
    pub h: f64,
    pub nodes: usize,
    pub outer_steps: usize,
    pub inner_steps: usize,
    pub stop_reason: Option<String>,
    #[serde(flatten)]
    pub errors: ErrorMeasures,
    pub riem_max: f64,
    pub riem_min: f64,
    pub gauss_max: f64,
    pub gauss_min: f64,
    pub w_max: f64,
    pub rho_max: f64,
    pub area_relative_error: f64,
    pub chern_weil_residual: f64,
}

/// Table statistics over the quadrature nodes.
pub fn summarize(scheme: &QuadratureScheme, coeffs: &CoefficientSet, truncation: f64) -> Result<Summary> {
    let samples = scheme.samples(coeffs, truncation)?;
    let weights = scheme.weights(coeffs, truncation)?;
    let errors = error_measures_from_samples(coeffs, &samples, &weights);
    let lambda = errors.average_scalar;
    let mut s = Summary {
        polygon: coeffs.polygon().name().to_string(),
        k: coeffs.polygon().k(),
        vertices: coeffs.polygon().vertex_count(),
        lattice_points: coeffs.len(),
        h: scheme.h(),
        nodes: scheme.len(),
        outer_steps: 0,
        inner_steps: 0,
        stop_reason: None,
        errors,
        riem_max: f64::NEG_INFINITY,
        riem_min: f64::INFINITY,
        gauss_max: f64::NEG_INFINITY,
        gauss_min: f64::INFINITY,
        w_max: 0.0,
        rho_max: 0.0,
        area_relative_error: f64::NAN,
        chern_weil_residual: f64::NAN,
    };
    let mut area = 0.0;
    let mut cw = 0.0;
    for (c, w) in samples.iter().zip(&weights) {
        area += w;
        cw += w * (c.riem_sq - c.scalar * c.scalar);
        let r = c.rescaled(lambda);
        s.riem_max = s.riem_max.max(r.riem_norm());
        s.riem_min = s.riem_min.min(r.riem_norm());
        s.gauss_max = s.gauss_max.max(r.gauss);
        s.gauss_min = s.gauss_min.min(r.gauss);
        s.w_max = s.w_max.max(r.w_norm);
        s.rho_max = s.rho_max.max(r.rho_norm);
    }
    let poly = coeffs.polygon();
    s.area_relative_error = area / poly.area() - 1.0;
    s.chern_weil_residual = 0.25 * cw - (poly.vertex_count() as f64 - 6.0);
    Ok(s)
}

/// Jet at a chart point, re-exported for callers that only hold an atlas.
pub fn jet_in_chart(coeffs: &CoefficientSet, atlas: &Atlas, chart: usize, t_chart: [f64; 2]) -> Result<PotentialJet> {
    eval_jet(coeffs, &atlas.charts[chart], t_chart, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::Polygon;
    use std::sync::Arc;

    #[test]
    fn newton_recovers_points() {
        let pent = Arc::new(Polygon::preset("pentagon").unwrap().scale(3).unwrap());
        let n = pent.lattice_points().len();
        let logs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.41).sin()).collect();
        let c = CoefficientSet::from_logs(pent.clone(), logs).unwrap().normalize().unwrap();
        let atlas = Atlas::build(&pent);
        for x in [[3.0, 3.0], [0.01, 0.02], [5.99, 1.0], [4.49, 4.49], [0.5, 5.9]] {
            let (jet, _) = invert_moment_map(&c, &atlas, x).unwrap();
            assert!((jet.x[0] - x[0]).abs() < 1e-10 && (jet.x[1] - x[1]).abs() < 1e-10, "{x:?} {:?}", jet.x);
        }
    }

    #[test]
    fn fubini_study_field() {
        let c = CoefficientSet::multinomial_triangle(2).unwrap();
        let rep = field_grid(&c, 0.25, 1e-3, 3.0, true).unwrap();
        assert_eq!(rep.failures, 0);
        assert!(!rep.rows.is_empty());
        for r in &rep.rows {
            assert!((r.S - 1.0).abs() < 1e-9);
            assert!((r.K - 1.0 / 6.0).abs() < 1e-8);
            assert!(r.bach_norm < 1e-6);
            assert!(r.Shat.abs() < 1e-8);
        }
    }
}
