//! Integral Delzant polygons and the elementary geometry attached to them.
//!
//! A [`Polygon`] is validated on construction: integral vertices listed
//! counterclockwise, strictly convex, and Delzant at every vertex. Everything
//! else in the crate (lattice points, vertex charts, the quadrature grid and
//! the extremal affine function) is derived from it.

use std::collections::HashSet;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Lattice = [i64; 2];

/// One boundary edge, running from `start` to `end` (counterclockwise).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub start: usize,
    pub end: usize,
    /// Primitive inward normal `v_r`.
    pub inward_normal: Lattice,
    /// `c_r` with the edge on `<v_r, x> = c_r` and `<v_r, x> > c_r` inside.
    pub support: i64,
    /// Number of lattice steps along the edge.
    pub lattice_length: i64,
    /// Primitive direction from `start` to `end`.
    pub tangent: Lattice,
}

impl Edge {
    /// `<v_r, x> - c_r`, non-negative on the closed polygon.
    #[inline]
    pub fn distance(&self, x: [f64; 2]) -> f64 {
        self.inward_normal[0] as f64 * x[0] + self.inward_normal[1] as f64 * x[1]
            - self.support as f64
    }

    #[inline]
    pub fn distance_lattice(&self, nu: Lattice) -> i64 {
        self.inward_normal[0] * nu[0] + self.inward_normal[1] * nu[1] - self.support
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Polygon {
    name: String,
    k: i64,
    vertices: Vec<Lattice>,
    edges: Vec<Edge>,
    area: f64,
    centroid: [f64; 2],
    lattice: Vec<Lattice>,
}

pub const PRESET_NAMES: [&str; 4] = ["pentagon", "hexagon", "heptagon", "octagon"];

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

fn primitive(v: Lattice) -> (Lattice, i64) {
    let g = gcd(v[0], v[1]);
    ([v[0] / g, v[1] / g], g)
}

#[inline]
fn cross(a: Lattice, b: Lattice) -> i64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn sub(a: Lattice, b: Lattice) -> Lattice {
    [a[0] - b[0], a[1] - b[1]]
}

impl Polygon {
    /// Validates the vertex list and computes edges, area, centroid and lattice points.
    pub fn from_vertices(vertices: Vec<Lattice>, k: i64) -> Result<Self> {
        Self::named("custom", vertices, k)
    }

    pub fn named(name: &str, vertices: Vec<Lattice>, k: i64) -> Result<Self> {
        let p = vertices.len();
        if p < 3 {
            return Err(Error::TooFewVertices(p));
        }
        if k <= 0 {
            return Err(Error::Config(format!("bounding square side k = {k} must be positive")));
        }
        for &v in &vertices {
            if v[0] < 0 || v[1] < 0 || v[0] > k || v[1] > k {
                return Err(Error::ExceedsBoundingSquare { position: v, k });
            }
        }

        // Turn signs: all positive for a counterclockwise convex polygon.
        let turns: Vec<i64> = (0..p)
            .map(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % p];
                let c = vertices[(i + 2) % p];
                cross(sub(b, a), sub(c, b))
            })
            .collect();
        if turns.iter().all(|&t| t < 0) {
            return Err(Error::NotCounterclockwise);
        }
        if let Some(i) = turns.iter().position(|&t| t <= 0) {
            return Err(Error::NotConvex { vertex: (i + 1) % p });
        }
        // Left turns everywhere could still wind more than once.
        let total_turning: f64 = (0..p)
            .map(|i| {
                let a = sub(vertices[(i + 1) % p], vertices[i]);
                let b = sub(vertices[(i + 2) % p], vertices[(i + 1) % p]);
                (cross(a, b) as f64).atan2((a[0] * b[0] + a[1] * b[1]) as f64)
            })
            .sum();
        if (total_turning - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(Error::NotConvex { vertex: 0 });
        }

        for i in 0..p {
            let v = vertices[i];
            let (to_prev, _) = primitive(sub(vertices[(i + p - 1) % p], v));
            let (to_next, _) = primitive(sub(vertices[(i + 1) % p], v));
            let det = cross(to_prev, to_next);
            if det.abs() != 1 {
                return Err(Error::NotDelzant {
                    vertex: i,
                    position: v,
                    det,
                });
            }
        }

        let edges: Vec<Edge> = (0..p)
            .map(|i| {
                let j = (i + 1) % p;
                let (tangent, lattice_length) = primitive(sub(vertices[j], vertices[i]));
                let inward_normal = [-tangent[1], tangent[0]];
                let support = inward_normal[0] * vertices[i][0] + inward_normal[1] * vertices[i][1];
                Edge {
                    start: i,
                    end: j,
                    inward_normal,
                    support,
                    lattice_length,
                    tangent,
                }
            })
            .collect();

        let mut poly = Polygon {
            name: name.to_string(),
            k,
            vertices,
            edges,
            area: 0.0,
            centroid: [0.0; 2],
            lattice: Vec::new(),
        };
        let m = poly.moments();
        poly.area = m.area;
        poly.centroid = [m.x / m.area, m.y / m.area];
        poly.lattice = poly.enumerate_lattice();
        Ok(poly)
    }

    /// One of the four named polygons at its base scale.
    pub fn preset(name: &str) -> Result<Self> {
        let (k, verts): (i64, Vec<Lattice>) = match name {
            "pentagon" => (2, vec![[0, 0], [2, 0], [2, 1], [1, 2], [0, 2]]),
            "hexagon" => (6, vec![[0, 0], [3, 0], [6, 3], [6, 6], [3, 6], [0, 3]]),
            "octagon" => (
                6,
                vec![[2, 0], [4, 0], [6, 2], [6, 4], [4, 6], [2, 6], [0, 4], [0, 2]],
            ),
            "heptagon" => (
                5,
                vec![[0, 0], [5, 0], [5, 1], [4, 3], [3, 4], [1, 5], [0, 5]],
            ),
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        Self::named(name, verts, k)
    }

    /// Preset shape at bounding-square side `k`, which must be a multiple of
    /// the smallest integral scale of that shape (e.g. even for the hexagon).
    pub fn preset_with_k(name: &str, k: i64) -> Result<Self> {
        Self::preset(name)?.rescaled_to(k)
    }

    /// The same shape at a different bounding side `k`.
    pub fn rescaled_to(&self, k: i64) -> Result<Self> {
        let prim = self.primitive_scale();
        let base = self.k / prim;
        if k <= 0 || k % base != 0 {
            return Err(Error::Config(format!(
                "{} needs k to be a positive multiple of {base}, got {k}",
                self.name
            )));
        }
        let verts = self
            .vertices
            .iter()
            .map(|v| [v[0] / prim * (k / base), v[1] / prim * (k / base)])
            .collect();
        Self::named(&self.name, verts, k)
    }

    /// Largest integer `g` such that the polygon is `g` times an integral polygon
    /// with bounding side `k / g`.
    pub fn primitive_scale(&self) -> i64 {
        self.vertices
            .iter()
            .fold(self.k, |g, v| gcd(gcd(g, v[0]), v[1]))
    }

    /// Multiplies vertices and `k` by `factor`.
    pub fn scale(&self, factor: i64) -> Result<Self> {
        if factor <= 0 {
            return Err(Error::Config(format!("scale factor {factor} must be positive")));
        }
        let verts = self
            .vertices
            .iter()
            .map(|v| [v[0] * factor, v[1] * factor])
            .collect();
        Self::named(&self.name, verts, self.k * factor)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn k(&self) -> i64 {
        self.k
    }
    pub fn vertices(&self) -> &[Lattice] {
        &self.vertices
    }
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
    /// Number of vertices `p`.
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }
    pub fn area(&self) -> f64 {
        self.area
    }
    pub fn centroid(&self) -> [f64; 2] {
        self.centroid
    }
    /// Lattice points of the closed polygon in lexicographic order.
    pub fn lattice_points(&self) -> &[Lattice] {
        &self.lattice
    }

    /// Total lattice length of the boundary.
    pub fn boundary_mass(&self) -> f64 {
        self.edges.iter().map(|e| e.lattice_length as f64).sum()
    }

    pub fn contains_lattice(&self, nu: Lattice) -> bool {
        self.edges.iter().all(|e| e.distance_lattice(nu) >= 0)
    }

    /// Smallest edge distance `min_r (<v_r,x> - c_r)`; positive iff strictly inside.
    pub fn min_edge_distance(&self, x: [f64; 2]) -> f64 {
        self.edges
            .iter()
            .map(|e| e.distance(x))
            .fold(f64::INFINITY, f64::min)
    }

    fn enumerate_lattice(&self) -> Vec<Lattice> {
        let mut pts = Vec::new();
        let (xmin, xmax) = min_max(self.vertices.iter().map(|v| v[0]));
        let (ymin, ymax) = min_max(self.vertices.iter().map(|v| v[1]));
        for i in xmin..=xmax {
            for j in ymin..=ymax {
                if self.contains_lattice([i, j]) {
                    pts.push([i, j]);
                }
            }
        }
        pts
    }

    /// Exact low-order moments of the region.
    pub fn moments(&self) -> Moments {
        let p = self.vertices.len();
        let mut m = Moments::default();
        for i in 0..p {
            let [x0, y0] = self.vertices[i].map(|c| c as f64);
            let [x1, y1] = self.vertices[(i + 1) % p].map(|c| c as f64);
            let c = x0 * y1 - x1 * y0;
            m.area += c / 2.0;
            m.x += (x0 + x1) * c / 6.0;
            m.y += (y0 + y1) * c / 6.0;
            m.xx += (x0 * x0 + x0 * x1 + x1 * x1) * c / 12.0;
            m.yy += (y0 * y0 + y0 * y1 + y1 * y1) * c / 12.0;
            m.xy += (x0 * y1 + 2.0 * x0 * y0 + 2.0 * x1 * y1 + x1 * y0) * c / 24.0;
        }
        m
    }

    /// The affine function `A` with `∫_P A g dx = ∫_∂P g dσ` for `g ∈ {1, x1, x2}`,
    /// where `dσ` gives each edge mass equal to its lattice length.
    pub fn extremal_affine(&self) -> Result<ExtremalAffine> {
        let m = self.moments();
        let gram = Matrix3::new(
            m.area, m.x, m.y, //
            m.x, m.xx, m.xy, //
            m.y, m.xy, m.yy,
        );
        let mut rhs = Vector3::zeros();
        for e in &self.edges {
            let a = self.vertices[e.start].map(|c| c as f64);
            let b = self.vertices[e.end].map(|c| c as f64);
            let len = e.lattice_length as f64;
            rhs[0] += len;
            rhs[1] += len * (a[0] + b[0]) / 2.0;
            rhs[2] += len * (a[1] + b[1]) / 2.0;
        }
        let sol = gram
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularSystem("extremal affine function"))?;
        Ok(ExtremalAffine {
            coefficients: [sol[0], sol[1], sol[2]],
        })
    }

    /// Guillemin potential `U0 = b Σ_r ℓ_r log ℓ_r` with `ℓ_r = <v_r,x> - c_r`,
    /// together with its gradient and Hessian.
    pub fn guillemin(&self, b: f64, x: [f64; 2]) -> Result<Guillemin> {
        let mut g = Guillemin {
            value: 0.0,
            gradient: [0.0; 2],
            hessian: [[0.0; 2]; 2],
        };
        for e in &self.edges {
            let l = e.distance(x);
            if l <= 0.0 {
                return Err(Error::OnBoundary(x));
            }
            let n = e.inward_normal.map(|c| c as f64);
            let ll = l.ln();
            g.value += b * l * ll;
            for a in 0..2 {
                g.gradient[a] += b * n[a] * (ll + 1.0);
                for c in 0..2 {
                    g.hessian[a][c] += b * n[a] * n[c] / l;
                }
            }
        }
        Ok(g)
    }

    /// All affine lattice maps `x ↦ Lx + w` (`L ∈ GL(2,Z)`) permuting the vertices.
    pub fn lattice_symmetries(&self) -> Vec<AffineMap> {
        let p = self.vertices.len();
        let vset: HashSet<Lattice> = self.vertices.iter().copied().collect();
        let mut out: Vec<AffineMap> = Vec::new();
        let src_a = sub(self.vertices[1], self.vertices[0]);
        let src_b = sub(self.vertices[p - 1], self.vertices[0]);
        let det = cross(src_a, src_b);
        for j in 0..p {
            let next = sub(self.vertices[(j + 1) % p], self.vertices[j]);
            let prev = sub(self.vertices[(j + p - 1) % p], self.vertices[j]);
            for (ta, tb) in [(next, prev), (prev, next)] {
                // L [a b] = [ta tb]  =>  L = [ta tb] adj([a b]) / det
                let adj = [[src_b[1], -src_b[0]], [-src_a[1], src_a[0]]];
                let num = [
                    [
                        ta[0] * adj[0][0] + tb[0] * adj[1][0],
                        ta[0] * adj[0][1] + tb[0] * adj[1][1],
                    ],
                    [
                        ta[1] * adj[0][0] + tb[1] * adj[1][0],
                        ta[1] * adj[0][1] + tb[1] * adj[1][1],
                    ],
                ];
                if num.iter().flatten().any(|v| v % det != 0) {
                    continue;
                }
                let linear = num.map(|row| row.map(|v| v / det));
                let ldet = linear[0][0] * linear[1][1] - linear[0][1] * linear[1][0];
                if ldet.abs() != 1 {
                    continue;
                }
                let lv0 = mat_vec(linear, self.vertices[0]);
                let map = AffineMap {
                    linear,
                    shift: sub(self.vertices[j], lv0),
                };
                if self.vertices.iter().all(|&v| vset.contains(&map.apply(v)))
                    && !out.contains(&map)
                {
                    out.push(map);
                }
            }
        }
        out.sort_by_key(|m| (m != &AffineMap::identity(), m.linear, m.shift));
        out
    }
}

fn min_max(it: impl Iterator<Item = i64>) -> (i64, i64) {
    it.fold((i64::MAX, i64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[inline]
fn mat_vec(m: [[i64; 2]; 2], v: Lattice) -> Lattice {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Integrals of `1, x1, x2, x1², x1 x2, x2²` over the polygon.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    pub area: f64,
    pub x: f64,
    pub y: f64,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

/// `A(x) = A0 + A1 x1 + A2 x2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalAffine {
    pub coefficients: [f64; 3],
}

impl ExtremalAffine {
    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let [a0, a1, a2] = self.coefficients;
        a0 + a1 * x[0] + a2 * x[1]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Guillemin {
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: [[f64; 2]; 2],
}

impl Guillemin {
    pub fn hessian_det(&self) -> f64 {
        self.hessian[0][0] * self.hessian[1][1] - self.hessian[0][1] * self.hessian[1][0]
    }
}

/// Integral affine map `x ↦ Lx + w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineMap {
    pub linear: [[i64; 2]; 2],
    pub shift: Lattice,
}

impl AffineMap {
    pub fn identity() -> Self {
        AffineMap {
            linear: [[1, 0], [0, 1]],
            shift: [0, 0],
        }
    }

    #[inline]
    pub fn apply(&self, v: Lattice) -> Lattice {
        let l = mat_vec(self.linear, v);
        [l[0] + self.shift[0], l[1] + self.shift[1]]
    }

    #[inline]
    pub fn apply_real(&self, x: [f64; 2]) -> [f64; 2] {
        let m = self.linear.map(|r| r.map(|c| c as f64));
        [
            m[0][0] * x[0] + m[0][1] * x[1] + self.shift[0] as f64,
            m[1][0] * x[0] + m[1][1] * x[1] + self.shift[1] as f64,
        ]
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        let a = self.linear;
        let b = other.linear;
        let linear = [
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ];
        AffineMap {
            linear,
            shift: self.apply(other.shift),
        }
    }

    pub fn inverse(&self) -> AffineMap {
        let l = self.linear;
        let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
        // det = ±1 so the adjugate divided by det stays integral.
        let linear = [[l[1][1] * det, -l[0][1] * det], [-l[1][0] * det, l[0][0] * det]];
        let w = mat_vec(linear, self.shift);
        AffineMap {
            linear,
            shift: [-w[0], -w[1]],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(m: i64) -> Polygon {
        Polygon::from_vertices(vec![[0, 0], [m, 0], [m, m], [0, m]], m).unwrap()
    }

    fn triangle(k: i64) -> Polygon {
        Polygon::from_vertices(vec![[0, 0], [k, 0], [0, k]], k).unwrap()
    }

    #[test]
    fn unit_square_basic_data() {
        let s = square(1);
        assert_eq!(s.vertex_count(), 4);
        assert_eq!(s.area(), 1.0);
        assert_eq!(s.centroid(), [0.5, 0.5]);
        assert_eq!(s.lattice_points().len(), 4);
    }

    #[test]
    fn hexagon_area_and_lattice() {
        let h = Polygon::preset("hexagon").unwrap();
        assert_eq!(h.vertex_count(), 6);
        assert_relative_eq!(h.area(), 27.0);
        assert_relative_eq!(h.centroid()[0], 3.0);
        assert_eq!(h.lattice_points().len(), 37);
        // Pick: A = I + B/2 - 1 with B = 18
        assert_eq!(h.boundary_mass(), 18.0);
    }

    #[test]
    fn rejects_bad_polygons() {
        let err = Polygon::from_vertices(vec![[0, 0], [2, 0], [1, 2]], 2).unwrap_err();
        match err {
            Error::NotDelzant { det, .. } => assert_eq!(det.abs(), 2),
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(
            Polygon::from_vertices(vec![[0, 0], [0, 1], [1, 1], [1, 0]], 1),
            Err(Error::NotCounterclockwise)
        ));
        assert!(matches!(
            Polygon::from_vertices(vec![[0, 0], [1, 0], [2, 0], [2, 2], [0, 2]], 2),
            Err(Error::NotConvex { .. })
        ));
        assert!(matches!(
            Polygon::from_vertices(vec![[0, 0], [3, 0], [0, 3]], 2),
            Err(Error::ExceedsBoundingSquare { .. })
        ));
        assert!(matches!(
            Polygon::from_vertices(vec![[0, 0], [1, 0]], 1),
            Err(Error::TooFewVertices(2))
        ));
        assert!(matches!(Polygon::preset("nonagon"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn presets_match_figures() {
        let p = Polygon::preset("pentagon").unwrap();
        assert_eq!(p.vertices(), &[[0, 0], [2, 0], [2, 1], [1, 2], [0, 2]]);
        assert_eq!(p.k(), 2);
        let o = Polygon::preset("octagon").unwrap();
        assert_eq!(o.vertex_count(), 8);
        assert_eq!(o.vertices()[..3], [[2, 0], [4, 0], [6, 2]]);
        let h = Polygon::preset("heptagon").unwrap();
        assert_eq!(h.vertex_count(), 7);
        assert_eq!(h.vertices()[1..5], [[5, 0], [5, 1], [4, 3], [3, 4]]);
    }

    #[test]
    fn scaling() {
        let h = Polygon::preset("hexagon").unwrap();
        let h2 = h.scale(2).unwrap();
        assert_eq!(h2.k(), 12);
        assert_eq!(h2.vertices()[3], [12, 12]);
        let same = h.scale(1).unwrap();
        assert_eq!(same.vertices(), h.vertices());
        let p = Polygon::preset("pentagon").unwrap().scale(10).unwrap();
        assert_eq!(p.k(), 20);
        assert_relative_eq!(p.area(), 350.0);
        let h4 = Polygon::preset_with_k("hexagon", 4).unwrap();
        assert_eq!(h4.vertices(), &[[0, 0], [2, 0], [4, 2], [4, 4], [2, 4], [0, 2]]);
        assert!(Polygon::preset_with_k("hexagon", 5).is_err());
        assert_eq!(Polygon::preset("octagon").unwrap().primitive_scale(), 2);
    }

    #[test]
    fn triangle_lattice_count() {
        assert_eq!(triangle(2).lattice_points().len(), 6);
        let pts = triangle(2).lattice_points().to_vec();
        let mut sorted = pts.clone();
        sorted.sort();
        assert_eq!(pts, sorted);
    }

    #[test]
    fn extremal_affine_closed_forms() {
        for m in 1..4 {
            let a = square(m).extremal_affine().unwrap();
            assert_relative_eq!(a.coefficients[0], 4.0 / m as f64, epsilon = 1e-12);
            assert!(a.coefficients[1].abs() < 1e-12 && a.coefficients[2].abs() < 1e-12);
        }
        for k in 1..4 {
            let a = triangle(k).extremal_affine().unwrap();
            assert_relative_eq!(a.coefficients[0], 6.0 / k as f64, epsilon = 1e-12);
            assert!(a.coefficients[1].abs() < 1e-12);
        }
        let a = Polygon::preset("hexagon").unwrap().extremal_affine().unwrap();
        assert_relative_eq!(a.coefficients[0], 2.0 / 3.0, epsilon = 1e-12);
        assert!(a.coefficients[1].abs() < 1e-12 && a.coefficients[2].abs() < 1e-12);
        let a = Polygon::preset("octagon").unwrap().extremal_affine().unwrap();
        assert!(a.coefficients[1].abs() < 1e-12 && a.coefficients[2].abs() < 1e-12);
    }

    #[test]
    fn extremal_affine_integrates_to_boundary_mass() {
        for name in PRESET_NAMES {
            let p = Polygon::preset(name).unwrap();
            let a = p.extremal_affine().unwrap();
            let m = p.moments();
            let total = a.coefficients[0] * m.area + a.coefficients[1] * m.x + a.coefficients[2] * m.y;
            assert_relative_eq!(total, p.boundary_mass(), max_relative = 1e-12);
        }
    }

    #[test]
    fn guillemin_on_square() {
        let s = square(1);
        let g = s.guillemin(2.0, [0.5, 0.5]).unwrap();
        assert!(g.gradient[0].abs() < 1e-14 && g.gradient[1].abs() < 1e-14);
        assert_relative_eq!(g.hessian[0][0], 8.0, epsilon = 1e-12);
        assert_relative_eq!(g.hessian[1][1], 8.0, epsilon = 1e-12);
        assert_relative_eq!(g.hessian_det(), 64.0, epsilon = 1e-10);
        assert!(matches!(s.guillemin(2.0, [0.0, 0.5]), Err(Error::OnBoundary(_))));
    }

    #[test]
    fn symmetry_group_orders() {
        assert_eq!(Polygon::preset("hexagon").unwrap().lattice_symmetries().len(), 12);
        assert_eq!(square(1).lattice_symmetries().len(), 8);
        assert_eq!(Polygon::preset("octagon").unwrap().lattice_symmetries().len(), 8);
        assert_eq!(Polygon::preset("pentagon").unwrap().lattice_symmetries().len(), 2);
        let kite = Polygon::from_vertices(vec![[0, 0], [3, 0], [3, 1], [1, 3], [0, 3]], 3).unwrap();
        assert_eq!(kite.lattice_symmetries().len(), 2);
        let generic = Polygon::from_vertices(vec![[0, 0], [4, 0], [4, 1], [3, 2], [0, 2]], 4).unwrap();
        assert_eq!(generic.lattice_symmetries(), vec![AffineMap::identity()]);
    }

    #[test]
    fn symmetry_group_closed() {
        let g = Polygon::preset("hexagon").unwrap().lattice_symmetries();
        for a in &g {
            assert!(g.contains(&a.inverse()));
            assert_eq!(a.compose(&a.inverse()), AffineMap::identity());
            for b in &g {
                assert!(g.contains(&a.compose(b)));
            }
        }
    }

    #[test]
    fn extremal_affine_equivariant() {
        let p = Polygon::from_vertices(vec![[0, 0], [3, 0], [3, 1], [1, 3], [0, 3]], 3).unwrap();
        let a = p.extremal_affine().unwrap();
        for g in p.lattice_symmetries() {
            let img = Polygon::from_vertices(
                rotate_to_ccw_start(p.vertices().iter().map(|&v| g.apply(v)).collect()),
                p.k(),
            )
            .unwrap();
            let b = img.extremal_affine().unwrap();
            for x in [[0.7, 1.1], [2.0, 0.4], [1.5, 1.5]] {
                assert_relative_eq!(b.eval(g.apply_real(x)), a.eval(x), epsilon = 1e-12);
            }
        }
    }

    fn rotate_to_ccw_start(mut v: Vec<Lattice>) -> Vec<Lattice> {
        // reflections reverse orientation
        let area2: i64 = (0..v.len())
            .map(|i| cross(v[i], v[(i + 1) % v.len()]))
            .sum();
        if area2 < 0 {
            v.reverse();
        }
        v
    }
}
