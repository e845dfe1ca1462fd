//! Integration over the polygon through the moment map.
//!
//! A function on the manifold is integrated as `∫ f det∇²φ dt`. The
//! substitution `t = DU₀(x)` with the Guillemin potential `U₀` turns this
//! (its gradient shifted to vanish at the centroid)
//! into an integral over `P` that is approximated by the midpoint rule on a
//! grid of cell centres. The nodes depend only on the polygon, `h` and `b`,
//! so one scheme serves every coefficient iterate.

use std::borrow::Cow;
use std::sync::Arc;

use rayon::prelude::*;

use crate::curvature::CurvatureSample;
use crate::error::{Error, Result};
use crate::polygon::{ExtremalAffine, Polygon};
use crate::potential::{eval_weights, jet_from_weights, Atlas, CoefficientSet, PotentialJet, DEFAULT_TRUNCATION};
use crate::reduce::ordered_sum;

/// Default Guillemin scale.
pub const DEFAULT_B: f64 = 2.0;
/// Default grid resolution: `h = k / DEFAULT_N`.
pub const DEFAULT_N: f64 = 60.0;
/// Node count cap used when picking a default `h`.
pub const MAX_DEFAULT_NODES: f64 = 2e5;
/// Residual below which a coefficient set counts as normalized.
const NORMALIZED_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct QuadratureNode {
    pub x: [f64; 2],
    pub t: [f64; 2],
    pub chart: usize,
    pub t_chart: [f64; 2],
    /// `h² det∇²U₀(x)`.
    pub static_weight: f64,
}

#[derive(Clone, Debug)]
pub struct QuadratureScheme {
    polygon: Arc<Polygon>,
    atlas: Arc<Atlas>,
    h: f64,
    b: f64,
    nodes: Vec<QuadratureNode>,
}

/// `k / 60`, enlarged if needed so the grid has at most `2·10⁵` nodes.
pub fn default_h(poly: &Polygon) -> f64 {
    let h = poly.k() as f64 / DEFAULT_N;
    h.max((poly.area() / MAX_DEFAULT_NODES).sqrt())
}

impl QuadratureScheme {
    pub fn build(polygon: Arc<Polygon>, h: f64, b: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
        }
        if !(b >= 1.0 && b.is_finite()) {
            return Err(Error::Config(format!("Guillemin scale must be at least 1, got {b}")));
        }
        let atlas = Arc::new(Atlas::build(&polygon));
        let v = polygon.vertices();
        let xmin = v.iter().map(|p| p[0]).min().unwrap() as f64;
        let xmax = v.iter().map(|p| p[0]).max().unwrap() as f64;
        let ymin = v.iter().map(|p| p[1]).min().unwrap() as f64;
        let ymax = v.iter().map(|p| p[1]).max().unwrap() as f64;
        let margin = 1e-9 * polygon.k() as f64;
        let mut xs = Vec::new();
        let i0 = (xmin / h).floor() as i64;
        let i1 = (xmax / h).ceil() as i64;
        let j0 = (ymin / h).floor() as i64;
        let j1 = (ymax / h).ceil() as i64;
        for i in i0..=i1 {
            for j in j0..=j1 {
                let x = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                if polygon.min_edge_distance(x) > margin {
                    xs.push(x);
                }
            }
        }
        if xs.is_empty() {
            return Err(Error::EmptyGrid(h));
        }
        // U₀ is fixed up to an affine function; centre its gradient at the centroid
        let shift = polygon.guillemin(b, polygon.centroid())?.gradient;
        let nodes = xs
            .par_iter()
            .map(|&x| {
                let g = polygon.guillemin(b, x)?;
                let t = [g.gradient[0] - shift[0], g.gradient[1] - shift[1]];
                let chart = atlas.select_chart(t)?;
                Ok(QuadratureNode {
                    x,
                    t,
                    chart,
                    t_chart: atlas.charts[chart].to_chart(t),
                    static_weight: h * h * g.hessian_det(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(QuadratureScheme {
            polygon,
            atlas,
            h,
            b,
            nodes,
        })
    }

    pub fn with_defaults(polygon: Arc<Polygon>) -> Result<Self> {
        let h = default_h(&polygon);
        Self::build(polygon, h, DEFAULT_B)
    }

    pub fn polygon(&self) -> &Arc<Polygon> {
        &self.polygon
    }
    pub fn atlas(&self) -> &Arc<Atlas> {
        &self.atlas
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn nodes(&self) -> &[QuadratureNode] {
        &self.nodes
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest `max |z_a|` over the node chart assignments.
    pub fn max_chart_modulus(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| self.atlas.charts[n.chart].max_modulus(n.t))
            .fold(0.0, f64::max)
    }

    /// Checks the polygon and returns the normalized representative. The node
    /// positions are fixed in `t`, so integrals are only twist-invariant when
    /// evaluated for one representative of each twist class.
    fn check_coeffs<'c>(&self, coeffs: &'c CoefficientSet) -> Result<Cow<'c, CoefficientSet>> {
        if coeffs.polygon().vertices() != self.polygon.vertices() {
            return Err(Error::CoefficientMismatch(
                "coefficients belong to a different polygon".into(),
            ));
        }
        if coeffs.is_normalized(NORMALIZED_TOL) {
            Ok(Cow::Borrowed(coeffs))
        } else {
            Ok(Cow::Owned(coeffs.normalize()?))
        }
    }

    /// Jet at one node.
    pub fn jet(&self, coeffs: &CoefficientSet, node: &QuadratureNode, truncation: f64) -> Result<PotentialJet> {
        let chart = &self.atlas.charts[node.chart];
        crate::potential::eval_jet(coeffs, chart, node.t_chart, truncation)
    }

    /// Jets at every node, in node order.
    pub fn jets(&self, coeffs: &CoefficientSet, truncation: f64) -> Result<Vec<PotentialJet>> {
        let coeffs = &*self.check_coeffs(coeffs)?;
        self.nodes.par_iter().map(|n| self.jet(coeffs, n, truncation)).collect()
    }

    /// Curvature samples at every node (with `S - A` filled in).
    pub fn samples(&self, coeffs: &CoefficientSet, truncation: f64) -> Result<Vec<CurvatureSample>> {
        let coeffs = &*self.check_coeffs(coeffs)?;
        let affine = self.polygon.extremal_affine()?;
        self.nodes
            .par_iter()
            .map(|n| Ok(CurvatureSample::with_affine(&self.jet(coeffs, n, truncation)?, &affine)))
            .collect()
    }

    /// Full weights `h² det∇²U₀ det∇²φ` at every node.
    pub fn weights(&self, coeffs: &CoefficientSet, truncation: f64) -> Result<Vec<f64>> {
        let coeffs = &*self.check_coeffs(coeffs)?;
        self.nodes
            .par_iter()
            .map(|n| Ok(n.static_weight * self.jet(coeffs, n, truncation)?.hess_det()))
            .collect()
    }

    /// `Σ_α w_α det∇²φ(t_α) f_α` for per-node integrand values.
    pub fn integrate(&self, coeffs: &CoefficientSet, f: &[f64]) -> Result<f64> {
        if f.len() != self.nodes.len() {
            return Err(Error::Config(format!(
                "integrand has {} values for {} nodes",
                f.len(),
                self.nodes.len()
            )));
        }
        let coeffs = &*self.check_coeffs(coeffs)?;
        let items: Vec<(&QuadratureNode, f64)> = self.nodes.iter().zip(f.iter().copied()).collect();
        let total = ordered_sum(&items, 1, Vec::new, |(node, fv), w, acc| {
            let chart = &self.atlas.charts[node.chart];
            let ld = eval_weights(coeffs, chart, node.t_chart, DEFAULT_TRUNCATION, w);
            let jet = jet_from_weights(chart, node.chart, node.t_chart, w, ld)?;
            acc[0] += node.static_weight * jet.hess_det() * fv;
            Ok(())
        })?;
        Ok(total[0])
    }

    /// Integrates several functions of the jet at once; `f` fills `out`.
    pub fn integrate_jet_fn<F>(&self, coeffs: &CoefficientSet, truncation: f64, width: usize, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&PotentialJet, &mut [f64]) + Sync,
    {
        let coeffs = &*self.check_coeffs(coeffs)?;
        ordered_sum(
            &self.nodes,
            width,
            || (Vec::new(), vec![0.0; width]),
            |node, (w, vals), acc| {
                let chart = &self.atlas.charts[node.chart];
                let ld = eval_weights(coeffs, chart, node.t_chart, truncation, w);
                let jet = jet_from_weights(chart, node.chart, node.t_chart, w, ld)?;
                let wt = node.static_weight * jet.hess_det();
                vals.iter_mut().for_each(|v| *v = 0.0);
                f(&jet, vals);
                for (a, v) in acc.iter_mut().zip(vals.iter()) {
                    *a += wt * v;
                }
                Ok(())
            },
        )
    }

    /// `∫ det∇²φ dt`, which approximates the area of `P`.
    pub fn area(&self, coeffs: &CoefficientSet) -> Result<f64> {
        Ok(self.integrate_jet_fn(coeffs, DEFAULT_TRUNCATION, 1, |_, o| o[0] = 1.0)?[0])
    }

    /// `∫S / ∫1`.
    pub fn average_scalar(&self, coeffs: &CoefficientSet) -> Result<f64> {
        let r = self.integrate_jet_fn(coeffs, DEFAULT_TRUNCATION, 2, |jet, o| {
            o[0] = 1.0;
            o[1] = CurvatureSample::from_jet(jet).scalar;
        })?;
        Ok(r[1] / r[0])
    }

    /// `¼ ∫ (|Riem|² - S²) det∇²φ dt`, which equals `p - 6` for a smooth metric.
    pub fn chern_weil_integral(&self, coeffs: &CoefficientSet) -> Result<f64> {
        let r = self.integrate_jet_fn(coeffs, DEFAULT_TRUNCATION, 1, |jet, o| {
            let c = CurvatureSample::from_jet(jet);
            o[0] = c.riem_sq - c.scalar * c.scalar;
        })?;
        Ok(0.25 * r[0])
    }

    /// [`QuadratureScheme::chern_weil_integral`] minus `p - 6`.
    pub fn chern_weil_check(&self, coeffs: &CoefficientSet) -> Result<f64> {
        let p = self.polygon.vertex_count() as f64;
        Ok(self.chern_weil_integral(coeffs)? - (p - 6.0))
    }

    /// `∫ (S - A)² / ∫ 1` and related totals.
    pub fn residual_integrals(&self, coeffs: &CoefficientSet, affine: &ExtremalAffine) -> Result<[f64; 4]> {
        let r = self.integrate_jet_fn(coeffs, DEFAULT_TRUNCATION, 4, |jet, o| {
            let s = CurvatureSample::from_jet(jet).scalar;
            let d = s - affine.eval(jet.x);
            o[0] = 1.0;
            o[1] = s;
            o[2] = d;
            o[3] = d * d;
        })?;
        Ok([r[0], r[1], r[2], r[3]])
    }
}
