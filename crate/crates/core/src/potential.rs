//! Coefficient sets, the vertex-chart atlas and stable evaluation of the
//! Kähler potential `φ(t) = log Σ a_ν e^{ν·t}` with its derivatives.
//!
//! Derivatives of `φ` are the cumulants of the discrete measure
//! `p_ν ∝ a_ν e^{ν·t}` on the lattice points, so they are computed from
//! central moments rather than by differencing. Evaluation always happens in
//! a vertex chart where the relevant exponentials are bounded by one.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::polygon::{AffineMap, Lattice, Polygon};
use crate::tensor::{inv2, Mat2, Tensor3, Tensor4};

/// Default relative threshold below which monomial terms are dropped.
pub const DEFAULT_TRUNCATION: f64 = 1e-15;

/// Slack allowed on `max |z_a| <= 1` when assigning charts.
pub const CHART_TOLERANCE: f64 = 1e-9;

/// Positive weights `a_ν`, one per lattice point of the closed polygon
/// (in the polygon's lexicographic lattice order).
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    polygon: Arc<Polygon>,
    values: Vec<f64>,
    logs: Vec<f64>,
}

impl PartialEq for CoefficientSet {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values && self.polygon.vertices() == other.polygon.vertices()
    }
}

impl CoefficientSet {
    pub fn new(polygon: Arc<Polygon>, values: Vec<f64>) -> Result<Self> {
        let n = polygon.lattice_points().len();
        if values.len() != n {
            return Err(Error::CoefficientMismatch(format!(
                "expected {n} coefficients, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::CoefficientMismatch(format!(
                "coefficient {i} = {} is not positive and finite",
                values[i]
            )));
        }
        let logs = values.iter().map(|a| a.ln()).collect();
        Ok(CoefficientSet {
            polygon,
            values,
            logs,
        })
    }

    pub fn from_logs(polygon: Arc<Polygon>, logs: Vec<f64>) -> Result<Self> {
        let values = logs.iter().map(|l| l.exp()).collect();
        Self::new(polygon, values)
    }

    /// All `a_ν = 1`; already normalized.
    pub fn ones(polygon: Arc<Polygon>) -> Self {
        let n = polygon.lattice_points().len();
        CoefficientSet {
            polygon,
            values: vec![1.0; n],
            logs: vec![0.0; n],
        }
    }

    /// Product of binomial coefficients on the `m1 × m2` rectangle; the product of round spheres.
    pub fn binomial_rectangle(m1: i64, m2: i64) -> Result<Self> {
        let poly = Polygon::named(
            "rectangle",
            vec![[0, 0], [m1, 0], [m1, m2], [0, m2]],
            m1.max(m2),
        )?;
        let values = poly
            .lattice_points()
            .iter()
            .map(|nu| binomial(m1, nu[0]) * binomial(m2, nu[1]))
            .collect();
        Self::new(Arc::new(poly), values)
    }

    /// Multinomial coefficients on the triangle `(0,0),(k,0),(0,k)`; the Fubini-Study metric.
    pub fn multinomial_triangle(k: i64) -> Result<Self> {
        let poly = Polygon::named("triangle", vec![[0, 0], [k, 0], [0, k]], k)?;
        let values = poly
            .lattice_points()
            .iter()
            .map(|nu| binomial(k, nu[0]) * binomial(k - nu[0], nu[1]))
            .collect();
        Self::new(Arc::new(poly), values)
    }

    pub fn polygon(&self) -> &Arc<Polygon> {
        &self.polygon
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn logs(&self) -> &[f64] {
        &self.logs
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, nu: Lattice) -> Option<usize> {
        self.polygon.lattice_points().binary_search(&nu).ok()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `a_ν ↦ e^{α(ν)} a_ν` with `α(ν) = α0 + α1 ν1 + α2 ν2`; describes the same metric.
    pub fn twist(&self, alpha: [f64; 3]) -> Self {
        let logs = self
            .polygon
            .lattice_points()
            .iter()
            .zip(&self.logs)
            .map(|(nu, l)| l + alpha[0] + alpha[1] * nu[0] as f64 + alpha[2] * nu[1] as f64)
            .collect();
        Self::from_logs(self.polygon.clone(), logs).expect("twist keeps coefficients positive")
    }

    /// `(Σ log a, Σ (ν1-p1) log a, Σ (ν2-p2) log a)`.
    pub fn normalization_residuals(&self) -> [f64; 3] {
        let c = self.polygon.centroid();
        let mut r = [0.0; 3];
        for (nu, l) in self.polygon.lattice_points().iter().zip(&self.logs) {
            r[0] += l;
            r[1] += (nu[0] as f64 - c[0]) * l;
            r[2] += (nu[1] as f64 - c[1]) * l;
        }
        r
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.normalization_residuals().iter().all(|r| r.abs() <= tol)
    }

    /// The unique affine twist satisfying the three centred normalization conditions.
    pub fn normalize(&self) -> Result<Self> {
        let c = self.polygon.centroid();
        let mut gram = Matrix3::zeros();
        let mut rhs = Vector3::zeros();
        for (nu, l) in self.polygon.lattice_points().iter().zip(&self.logs) {
            let g = Vector3::new(1.0, nu[0] as f64 - c[0], nu[1] as f64 - c[1]);
            gram += g * g.transpose();
            rhs -= g * *l;
        }
        let beta = gram.lu().solve(&rhs).ok_or(Error::DegenerateLattice)?;
        let logs = self
            .polygon
            .lattice_points()
            .iter()
            .zip(&self.logs)
            .map(|(nu, l)| {
                l + beta[0] + beta[1] * (nu[0] as f64 - c[0]) + beta[2] * (nu[1] as f64 - c[1])
            })
            .collect();
        Self::from_logs(self.polygon.clone(), logs)
    }

    /// Averages `log a` over each orbit of `group` acting on the lattice points.
    pub fn symmetric_average(&self, group: &[AffineMap]) -> Result<Self> {
        let orbits = lattice_orbits(&self.polygon, group)?;
        let mut logs = self.logs.clone();
        for orbit in &orbits {
            let mean = orbit.iter().map(|&i| self.logs[i]).sum::<f64>() / orbit.len() as f64;
            for &i in orbit {
                logs[i] = mean;
            }
        }
        Self::from_logs(self.polygon.clone(), logs)
    }
}

/// Orbits of a group of lattice maps on the lattice points, as index lists.
pub fn lattice_orbits(polygon: &Polygon, group: &[AffineMap]) -> Result<Vec<Vec<usize>>> {
    let pts = polygon.lattice_points();
    let index: HashMap<Lattice, usize> = pts.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut seen = vec![false; pts.len()];
    let mut orbits = Vec::new();
    for start in 0..pts.len() {
        if seen[start] {
            continue;
        }
        let mut orbit = vec![start];
        seen[start] = true;
        for g in group {
            let img = *index
                .get(&g.apply(pts[start]))
                .ok_or(Error::GroupDoesNotPreserveLattice)?;
            if !seen[img] {
                seen[img] = true;
                orbit.push(img);
            }
        }
        orbit.sort_unstable();
        orbits.push(orbit);
    }
    Ok(orbits)
}

fn binomial(n: i64, k: i64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Unimodular frame at one vertex: `x' = L(x - v)` sends the two incident
/// edges onto the positive axes. Chart coordinates are `t'_i = d_i · t`
/// where `d_1, d_2` are the primitive directions towards the previous and
/// next vertices, and `|z_i| = exp(t'_i / 2)`.
#[derive(Clone, Debug)]
pub struct VertexChart {
    pub vertex: usize,
    pub origin: Lattice,
    /// Rows are the primitive edge directions `d_1`, `d_2`.
    pub directions: [Lattice; 2],
    /// `L = [d_1 d_2]^{-1}`.
    pub linear: [[i64; 2]; 2],
    /// `ν' = L(ν - v)` for every lattice point, in lattice order.
    pub exponents: Vec<[f64; 2]>,
}

impl VertexChart {
    /// Chart coordinates of an original `t`.
    #[inline]
    pub fn to_chart(&self, t: [f64; 2]) -> [f64; 2] {
        let d = self.directions.map(|r| r.map(|c| c as f64));
        [
            d[0][0] * t[0] + d[0][1] * t[1],
            d[1][0] * t[0] + d[1][1] * t[1],
        ]
    }

    /// Inverse of [`VertexChart::to_chart`].
    #[inline]
    pub fn from_chart(&self, tc: [f64; 2]) -> [f64; 2] {
        let l = self.linear.map(|r| r.map(|c| c as f64));
        // t = M^{-1} t' with M rows d_i; M^{-1} = L^T
        [
            l[0][0] * tc[0] + l[1][0] * tc[1],
            l[0][1] * tc[0] + l[1][1] * tc[1],
        ]
    }

    /// Original moment coordinates of a chart point `x'`.
    #[inline]
    pub fn moment_to_original(&self, xc: [f64; 2]) -> [f64; 2] {
        let d = self.directions.map(|r| r.map(|c| c as f64));
        [
            self.origin[0] as f64 + d[0][0] * xc[0] + d[1][0] * xc[1],
            self.origin[1] as f64 + d[0][1] * xc[0] + d[1][1] * xc[1],
        ]
    }

    /// Frame matrix `M` with `t' = M t`.
    pub fn frame(&self) -> Mat2 {
        self.directions.map(|r| r.map(|c| c as f64))
    }

    pub fn max_modulus(&self, t: [f64; 2]) -> f64 {
        let tc = self.to_chart(t);
        (0.5 * tc[0].max(tc[1])).exp()
    }
}

/// One chart per vertex.
#[derive(Clone, Debug)]
pub struct Atlas {
    pub charts: Vec<VertexChart>,
}

impl Atlas {
    pub fn build(poly: &Polygon) -> Self {
        let p = poly.vertex_count();
        let v = poly.vertices();
        let charts = (0..p)
            .map(|i| {
                let prev = poly.edges()[(i + p - 1) % p].tangent;
                let next = poly.edges()[i].tangent;
                let d1 = [-prev[0], -prev[1]];
                let d2 = next;
                // [d1 d2] has columns d1, d2; its inverse is the adjugate over det
                let det = d1[0] * d2[1] - d2[0] * d1[1];
                let linear = [[d2[1] * det, -d2[0] * det], [-d1[1] * det, d1[0] * det]];
                let exponents = poly
                    .lattice_points()
                    .iter()
                    .map(|nu| {
                        let r = [nu[0] - v[i][0], nu[1] - v[i][1]];
                        [
                            (linear[0][0] * r[0] + linear[0][1] * r[1]) as f64,
                            (linear[1][0] * r[0] + linear[1][1] * r[1]) as f64,
                        ]
                    })
                    .collect();
                VertexChart {
                    vertex: i,
                    origin: v[i],
                    directions: [d1, d2],
                    linear,
                    exponents,
                }
            })
            .collect();
        Atlas { charts }
    }

    pub fn len(&self) -> usize {
        self.charts.len()
    }
    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }

    /// The chart minimizing `max(|z_1|, |z_2|)` at original `t`; ties go to the lowest vertex index.
    pub fn select_chart(&self, t: [f64; 2]) -> Result<usize> {
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        for (i, c) in self.charts.iter().enumerate() {
            let tc = c.to_chart(t);
            let m = tc[0].max(tc[1]);
            if m < best_val {
                best_val = m;
                best = i;
            }
        }
        let modulus = (0.5 * best_val).exp();
        if !(modulus <= 1.0 + CHART_TOLERANCE) {
            return Err(Error::NoCoveringChart { t, best: modulus });
        }
        Ok(best)
    }

    /// Jet at an original `t`, evaluated in the selected chart.
    pub fn jet_at(&self, coeffs: &CoefficientSet, t: [f64; 2], truncation: f64) -> Result<PotentialJet> {
        let i = self.select_chart(t)?;
        let c = &self.charts[i];
        eval_jet(coeffs, c, c.to_chart(t), truncation)
    }
}

/// Derivatives of `φ` up to fourth order at one point, in the chart frame.
#[derive(Clone, Debug)]
pub struct PotentialJet {
    pub chart: usize,
    pub t_chart: [f64; 2],
    /// `log D` in the chart frame (the chart potential value).
    pub log_partition: f64,
    pub d1: [f64; 2],
    pub d2: Mat2,
    pub d3: Tensor3,
    pub d4: Tensor4,
    pub hess_inv: Mat2,
    /// Moment point in original coordinates.
    pub x: [f64; 2],
}

impl PotentialJet {
    /// Jet assembled from given derivatives (no chart attached).
    pub fn from_derivatives(d1: [f64; 2], d2: Mat2, d3: Tensor3, d4: Tensor4) -> Self {
        PotentialJet {
            chart: usize::MAX,
            t_chart: [0.0; 2],
            log_partition: 0.0,
            d1,
            d2,
            d3,
            d4,
            hess_inv: inv2(&d2),
            x: d1,
        }
    }

    /// Jet of `λφ`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut j = self.clone();
        j.d1 = j.d1.map(|v| v * lambda);
        j.d2 = j.d2.map(|r| r.map(|v| v * lambda));
        j.d3 = j.d3.map(|m| m.map(|r| r.map(|v| v * lambda)));
        j.d4 = j.d4.map(|t| t.map(|m| m.map(|r| r.map(|v| v * lambda))));
        j.hess_inv = inv2(&j.d2);
        j
    }

    /// Re-expresses the derivatives in coordinates `s` with `t_chart = M s`.
    pub fn pulled_back(&self, m: &Mat2) -> Self {
        let mut j = self.clone();
        for a in 0..2 {
            j.d1[a] = (0..2).map(|i| m[i][a] * self.d1[i]).sum();
        }
        for a in 0..2 {
            for b in 0..2 {
                let mut s = 0.0;
                for i in 0..2 {
                    for k in 0..2 {
                        s += m[i][a] * m[k][b] * self.d2[i][k];
                    }
                }
                j.d2[a][b] = s;
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let mut s = 0.0;
                    for i in 0..2 {
                        for k in 0..2 {
                            for l in 0..2 {
                                s += m[i][a] * m[k][b] * m[l][c] * self.d3[i][k][l];
                            }
                        }
                    }
                    j.d3[a][b][c] = s;
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        let mut s = 0.0;
                        for i in 0..2 {
                            for k in 0..2 {
                                for l in 0..2 {
                                    for n in 0..2 {
                                        s += m[i][a] * m[k][b] * m[l][c] * m[n][d] * self.d4[i][k][l][n];
                                    }
                                }
                            }
                        }
                        j.d4[a][b][c][d] = s;
                    }
                }
            }
        }
        j.hess_inv = inv2(&j.d2);
        j
    }

    pub fn hess_det(&self) -> f64 {
        self.d2[0][0] * self.d2[1][1] - self.d2[0][1] * self.d2[1][0]
    }

    /// Moment point in original coordinates.
    pub fn moment_map(&self) -> [f64; 2] {
        self.x
    }
}

/// Normalized weights `p_ν = a_ν e^{ν'·t'} / D` in one chart. Entries below the
/// truncation threshold are zero. Returns `log D`.
pub fn eval_weights(
    coeffs: &CoefficientSet,
    chart: &VertexChart,
    t_chart: [f64; 2],
    truncation: f64,
    out: &mut Vec<f64>,
) -> f64 {
    let logs = coeffs.logs();
    out.clear();
    out.extend(
        chart
            .exponents
            .iter()
            .zip(logs)
            .map(|(e, l)| l + e[0] * t_chart[0] + e[1] * t_chart[1]),
    );
    let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cutoff = if truncation > 0.0 { truncation.ln() } else { f64::NEG_INFINITY };
    let mut sum = 0.0;
    for w in out.iter_mut() {
        let r = *w - m;
        *w = if r < cutoff { 0.0 } else { r.exp() };
        sum += *w;
    }
    let inv = 1.0 / sum;
    for w in out.iter_mut() {
        *w *= inv;
    }
    m + sum.ln()
}

/// Jet from precomputed normalized weights.
pub fn jet_from_weights(
    chart: &VertexChart,
    chart_index: usize,
    t_chart: [f64; 2],
    weights: &[f64],
    log_partition: f64,
) -> Result<PotentialJet> {
    let mut mean = [0.0; 2];
    for (p, e) in weights.iter().zip(&chart.exponents) {
        mean[0] += p * e[0];
        mean[1] += p * e[1];
    }
    // central moments s[i][j] = Σ p d1^i d2^j, i + j in 2..=4
    let mut s = [[0.0f64; 5]; 5];
    for (p, e) in weights.iter().zip(&chart.exponents) {
        if *p == 0.0 {
            continue;
        }
        let u = e[0] - mean[0];
        let v = e[1] - mean[1];
        let (u2, v2) = (u * u, v * v);
        s[2][0] += p * u2;
        s[1][1] += p * u * v;
        s[0][2] += p * v2;
        s[3][0] += p * u2 * u;
        s[2][1] += p * u2 * v;
        s[1][2] += p * u * v2;
        s[0][3] += p * v2 * v;
        s[4][0] += p * u2 * u2;
        s[3][1] += p * u2 * u * v;
        s[2][2] += p * u2 * v2;
        s[1][3] += p * u * v2 * v;
        s[0][4] += p * v2 * v2;
    }
    let d2 = [[s[2][0], s[1][1]], [s[1][1], s[0][2]]];
    let mut d3 = [[[0.0; 2]; 2]; 2];
    let mut d4 = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                let n2 = a + b + c;
                d3[a][b][c] = s[3 - n2][n2];
                for d in 0..2 {
                    let n2 = a + b + c + d;
                    d4[a][b][c][d] = s[4 - n2][n2]
                        - d2[a][b] * d2[c][d]
                        - d2[a][c] * d2[b][d]
                        - d2[a][d] * d2[b][c];
                }
            }
        }
    }
    let hess_inv = inv2(&d2);
    let ok = mean.iter().chain(d2.iter().flatten()).chain(hess_inv.iter().flatten()).all(|v| v.is_finite())
        && log_partition.is_finite();
    if !ok {
        return Err(Error::NonFiniteResult("potential jet"));
    }
    Ok(PotentialJet {
        chart: chart_index,
        t_chart,
        log_partition,
        d1: mean,
        d2,
        d3,
        d4,
        hess_inv,
        x: chart.moment_to_original(mean),
    })
}

/// Derivatives of `φ` at chart coordinates `t_chart`.
pub fn eval_jet(
    coeffs: &CoefficientSet,
    chart: &VertexChart,
    t_chart: [f64; 2],
    truncation: f64,
) -> Result<PotentialJet> {
    let mut w = Vec::with_capacity(coeffs.len());
    let log_d = eval_weights(coeffs, chart, t_chart, truncation, &mut w);
    jet_from_weights(chart, chart.vertex, t_chart, &w, log_d)
}

/// `f_μ = e^{μ·t} / D(t)`, evaluated stably in a chart.
pub fn basis_function(coeffs: &CoefficientSet, chart: &VertexChart, t_chart: [f64; 2], mu: usize) -> f64 {
    let mut w = Vec::with_capacity(coeffs.len());
    let log_d = eval_weights(coeffs, chart, t_chart, 0.0, &mut w);
    let e = chart.exponents[mu];
    (e[0] * t_chart[0] + e[1] * t_chart[1] - log_d).exp()
}

/// Original-frame potential value `φ(t)`.
pub fn potential_value(coeffs: &CoefficientSet, atlas: &Atlas, t: [f64; 2]) -> Result<f64> {
    let i = atlas.select_chart(t)?;
    let c = &atlas.charts[i];
    let mut w = Vec::with_capacity(coeffs.len());
    let log_d = eval_weights(coeffs, c, c.to_chart(t), 0.0, &mut w);
    let v = c.origin;
    Ok(log_d + v[0] as f64 * t[0] + v[1] as f64 * t[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_square() -> Arc<Polygon> {
        Arc::new(Polygon::from_vertices(vec![[0, 0], [1, 0], [1, 1], [0, 1]], 1).unwrap())
    }

    #[test]
    fn normalize_is_idempotent_and_removes_twists() {
        let hex = Arc::new(Polygon::preset("hexagon").unwrap());
        let c = CoefficientSet::new(hex.clone(), vec![7.0; 37]).unwrap().normalize().unwrap();
        for v in c.values() {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-12);
        }
        let logs: Vec<f64> = (0..37).map(|i| ((i * 7919) % 13) as f64 / 5.0).collect();
        let base = CoefficientSet::from_logs(hex, logs).unwrap().normalize().unwrap();
        assert!(base.is_normalized(1e-10));
        let again = base.normalize().unwrap();
        for (a, b) in again.logs().iter().zip(base.logs()) {
            assert!((a - b).abs() < 1e-12);
        }
        let twisted = base.twist([3.0, 2.0, 0.0]).normalize().unwrap();
        for (a, b) in twisted.logs().iter().zip(base.logs()) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn rejects_bad_coefficients() {
        let sq = unit_square();
        assert!(CoefficientSet::new(sq.clone(), vec![1.0; 3]).is_err());
        assert!(CoefficientSet::new(sq, vec![1.0, -1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn atlas_frames() {
        let sq = unit_square();
        let atlas = Atlas::build(&sq);
        // vertex (0,0): directions towards (0,1) then (1,0)
        let c0 = &atlas.charts[0];
        for (nu, e) in sq.lattice_points().iter().zip(&c0.exponents) {
            let mut sorted = [e[0] as i64, e[1] as i64];
            sorted.sort();
            let mut orig = *nu;
            orig.sort();
            assert_eq!(sorted, orig);
        }
        // vertex (1,1): sigma(x) = (1 - x1, 1 - x2) up to order
        let c2 = &atlas.charts[2];
        assert_eq!(c2.origin, [1, 1]);
        for (nu, e) in sq.lattice_points().iter().zip(&c2.exponents) {
            let mut got = [e[0] as i64, e[1] as i64];
            got.sort();
            let mut want = [1 - nu[0], 1 - nu[1]];
            want.sort();
            assert_eq!(got, want);
        }
        let hex = Polygon::preset("hexagon").unwrap();
        let atlas = Atlas::build(&hex);
        let c = &atlas.charts[1];
        assert_eq!(c.origin, [3, 0]);
        assert_eq!(c.directions, [[-1, 0], [1, 1]]);
        let l = c.linear;
        assert_eq!((l[0][0] * l[1][1] - l[0][1] * l[1][0]).abs(), 1);
        // L maps (-1,0) -> (1,0) and (1,1) -> (0,1)
        assert_eq!([l[0][0] * -1, l[1][0] * -1], [1, 0]);
        assert_eq!([l[0][0] + l[0][1], l[1][0] + l[1][1]], [0, 1]);
        for ch in &atlas.charts {
            assert!(ch.exponents.iter().all(|e| e[0] >= 0.0 && e[1] >= 0.0));
        }
    }

    #[test]
    fn chart_selection() {
        let sq = unit_square();
        let atlas = Atlas::build(&sq);
        assert_eq!(atlas.select_chart([0.0, 0.0]).unwrap(), 0);
        let t1 = (0.9f64 / 0.1).ln();
        let i = atlas.select_chart([t1, 0.0]).unwrap();
        assert!(sq.vertices()[i] == [1, 0] || sq.vertices()[i] == [1, 1]);
        assert!(atlas.charts[i].max_modulus([t1, 0.0]) <= 1.0 + 1e-12);
    }

    #[test]
    fn square_jet_at_origin() {
        let sq = unit_square();
        let c = CoefficientSet::ones(sq.clone());
        let atlas = Atlas::build(&sq);
        let j = eval_jet(&c, &atlas.charts[0], [0.0, 0.0], 0.0).unwrap();
        assert_relative_eq!(j.d2[0][0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(j.d2[1][1], 0.25, epsilon = 1e-15);
        assert!(j.d2[0][1].abs() < 1e-15);
        assert!(j.d3[0][0][0].abs() < 1e-15);
        assert_relative_eq!(j.d4[0][0][0][0], -0.125, epsilon = 1e-15);
        assert_eq!(j.moment_map(), [0.5, 0.5]);
        for mu in 0..4 {
            assert_relative_eq!(basis_function(&c, &atlas.charts[0], [0.0, 0.0], mu), 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn triangle_jet_covariance() {
        let c = CoefficientSet::multinomial_triangle(1).unwrap();
        let atlas = Atlas::build(c.polygon());
        let j = eval_jet(&c, &atlas.charts[0], [0.0, 0.0], 0.0).unwrap();
        assert_relative_eq!(j.d2[0][0], 2.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(j.d2[0][1], -1.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(j.x[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(j.x[1], 1.0 / 3.0, epsilon = 1e-15);
        let id = crate::tensor::mat_mul(&j.hess_inv, &j.d2);
        assert!((id[0][0] - 1.0).abs() < 1e-12 && id[0][1].abs() < 1e-12);
    }

    #[test]
    fn vertex_limit() {
        let sq = unit_square();
        let c = CoefficientSet::new(sq.clone(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let atlas = Atlas::build(&sq);
        let ch = &atlas.charts[0];
        let j = eval_jet(&c, ch, [-80.0, -0.3], 0.0).unwrap();
        // first chart coordinate runs along d1 = (0,1): x2 -> 0
        assert!(j.x[1].abs() < 1e-15);
        let f0 = basis_function(&c, ch, [-80.0, -80.0], 0);
        assert_relative_eq!(f0, 1.0, epsilon = 1e-15);
        assert!(basis_function(&c, ch, [-80.0, -80.0], 3) < 1e-30);
    }

    #[test]
    fn partition_identity() {
        let hex = Arc::new(Polygon::preset("hexagon").unwrap());
        let logs: Vec<f64> = (0..37).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let c = CoefficientSet::from_logs(hex.clone(), logs).unwrap();
        let atlas = Atlas::build(&hex);
        for (ch, t) in [(0usize, [-0.3, -1.2]), (3, [0.0, -5.0]), (4, [-2.0, -0.1])] {
            let s: f64 = (0..37)
                .map(|mu| c.values()[mu] * basis_function(&c, &atlas.charts[ch], t, mu))
                .sum();
            assert_relative_eq!(s, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let hex = Arc::new(Polygon::preset("hexagon").unwrap());
        let logs: Vec<f64> = (0..37).map(|i| (i as f64 * 1.3).cos()).collect();
        let c = CoefficientSet::from_logs(hex.clone(), logs).unwrap();
        let atlas = Atlas::build(&hex);
        let ch = &atlas.charts[2];
        let t = [-0.7, -0.4];
        let j = eval_jet(&c, ch, t, 0.0).unwrap();
        let fd = |h: f64, a: usize, b: usize| {
            let mut tp = t;
            let mut tm = t;
            tp[b] += h;
            tm[b] -= h;
            (eval_jet(&c, ch, tp, 0.0).unwrap().d1[a] - eval_jet(&c, ch, tm, 0.0).unwrap().d1[a]) / (2.0 * h)
        };
        for a in 0..2 {
            for b in 0..2 {
                let e1 = (fd(1e-2, a, b) - j.d2[a][b]).abs();
                let e2 = (fd(5e-3, a, b) - j.d2[a][b]).abs();
                assert!(e1 < 1e-4);
                // second order: halving h quarters the error
                assert!(e2 < e1 / 3.0 || e1 < 1e-12, "{e1} {e2}");
            }
        }
    }

    #[test]
    fn truncation_does_not_matter() {
        let hex = Arc::new(Polygon::preset("hexagon").unwrap().scale(2).unwrap());
        let n = hex.lattice_points().len();
        let logs: Vec<f64> = hex
            .lattice_points()
            .iter()
            .map(|nu| -0.2 * ((nu[0] - 6) as f64).powi(2) - 0.2 * ((nu[1] - 6) as f64).powi(2))
            .collect();
        assert_eq!(logs.len(), n);
        let c = CoefficientSet::from_logs(hex.clone(), logs).unwrap();
        let atlas = Atlas::build(&hex);
        let t = [-3.0, -0.5];
        let a = eval_jet(&c, &atlas.charts[1], t, 0.0).unwrap();
        let b = eval_jet(&c, &atlas.charts[1], t, DEFAULT_TRUNCATION).unwrap();
        let sa = crate::curvature::CurvatureSample::from_jet(&a).scalar;
        let sb = crate::curvature::CurvatureSample::from_jet(&b).scalar;
        assert!((sa - sb).abs() < 1e-8);
    }

    #[test]
    fn symmetric_average_hexagon() {
        let hex = Arc::new(Polygon::preset("hexagon").unwrap());
        let group = hex.lattice_symmetries();
        let logs: Vec<f64> = (0..37).map(|i| (i as f64 * 1.37).sin() * 2.0).collect();
        let c = CoefficientSet::from_logs(hex.clone(), logs).unwrap();
        let avg = c.symmetric_average(&group).unwrap();
        let mut distinct: Vec<f64> = avg.logs().to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        assert_eq!(distinct.len(), 6);
        assert_eq!(lattice_orbits(&hex, &group).unwrap().len(), 6);
        assert_eq!(avg.symmetric_average(&group).unwrap().logs(), avg.logs());
        let id = vec![AffineMap::identity()];
        assert_eq!(c.symmetric_average(&id).unwrap().logs(), c.logs());
        let bad = vec![AffineMap {
            linear: [[1, 0], [0, 1]],
            shift: [1, 0],
        }];
        assert!(matches!(c.symmetric_average(&bad), Err(Error::GroupDoesNotPreserveLattice)));
    }
}
