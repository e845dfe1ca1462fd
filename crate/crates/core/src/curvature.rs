//! Curvature of the torus-invariant metric `φ_ab dt dt + φ_ab dθ dθ`
//! computed from a [`PotentialJet`].
//!
//! Sign and normalization conventions: `S = -F_{abcd} φ^{ac} φ^{bd}`,
//! `Ric_ac = -F_{abcd} φ^{bd}`, `|ρ|² = 2 ρ_ab ρ_cd φ^{ac} φ^{bd}` and
//! `K = (F_1122 - F_1212) / det φ`. With these the norm identity
//! `|Riem|² = S²/3 + (S-6K)²/24 + |w|² + |ρ|²/2` holds exactly, where
//! `|Riem|²` is the full contraction of `F`.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::polygon::ExtremalAffine;
use crate::potential::{eval_jet, Atlas, CoefficientSet, PotentialJet, VertexChart};
use crate::tensor::{contract2, det2, inv2, trace, Mat2, Tensor4};

/// `F_abcd = φ_abcd - φ_abi φ_cdj φ^{ij}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FTensor(pub Tensor4);

const PAIRS: [(usize, usize); 3] = [(0, 0), (0, 1), (1, 1)];

impl FTensor {
    pub fn from_jet(jet: &PotentialJet) -> Self {
        let g = &jet.hess_inv;
        let mut f = [[[[0.0; 2]; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        let mut s = 0.0;
                        for i in 0..2 {
                            for j in 0..2 {
                                s += jet.d3[a][b][i] * jet.d3[c][d][j] * g[i][j];
                            }
                        }
                        f[a][b][c][d] = jet.d4[a][b][c][d] - s;
                    }
                }
            }
        }
        FTensor(symmetrize(&f))
    }

    /// The six independent components `F_{pq}` for pairs `p <= q` of `{11, 12, 22}`.
    pub fn components(&self) -> [f64; 6] {
        let mut out = [0.0; 6];
        let mut n = 0;
        for (i, p) in PAIRS.iter().enumerate() {
            for q in &PAIRS[i..] {
                out[n] = self.0[p.0][p.1][q.0][q.1];
                n += 1;
            }
        }
        out
    }

    pub fn from_components(c: [f64; 6]) -> Self {
        let mut f = [[[[0.0; 2]; 2]; 2]; 2];
        let mut n = 0;
        for (i, p) in PAIRS.iter().enumerate() {
            for q in &PAIRS[i..] {
                for (a, b) in [(p.0, p.1), (p.1, p.0)] {
                    for (cc, d) in [(q.0, q.1), (q.1, q.0)] {
                        f[a][b][cc][d] = c[n];
                        f[cc][d][a][b] = c[n];
                    }
                }
                n += 1;
            }
        }
        FTensor(f)
    }

    /// Full contraction `⟨F, G⟩` with four inverse metrics.
    pub fn inner(&self, other: &FTensor, g: &Mat2) -> f64 {
        let (x, y) = (&self.0, &other.0);
        let mut s = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        let xv = x[a][b][c][d];
                        if xv == 0.0 {
                            continue;
                        }
                        for e in 0..2 {
                            for f in 0..2 {
                                for h in 0..2 {
                                    for l in 0..2 {
                                        s += xv * y[e][f][h][l] * g[a][e] * g[b][f] * g[c][h] * g[d][l];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        s
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        FTensor(self.0.map(|t| t.map(|m| m.map(|r| r.map(|v| v * lambda)))))
    }
}

// Average over the pair symmetries so they hold exactly in floating point.
fn symmetrize(f: &Tensor4) -> Tensor4 {
    let mut out = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    out[a][b][c][d] = 0.125
                        * (f[a][b][c][d]
                            + f[b][a][c][d]
                            + f[a][b][d][c]
                            + f[b][a][d][c]
                            + f[c][d][a][b]
                            + f[d][c][a][b]
                            + f[c][d][b][a]
                            + f[d][c][b][a]);
                }
            }
        }
    }
    out
}

pub fn f_tensor(jet: &PotentialJet) -> FTensor {
    FTensor::from_jet(jet)
}

/// `Ric_ac = -F_abcd φ^{bd}`.
pub fn ricci(f: &FTensor, jet: &PotentialJet) -> Mat2 {
    let g = &jet.hess_inv;
    let mut r = [[0.0; 2]; 2];
    for a in 0..2 {
        for c in 0..2 {
            let mut s = 0.0;
            for b in 0..2 {
                for d in 0..2 {
                    s += f.0[a][b][c][d] * g[b][d];
                }
            }
            r[a][c] = -s;
        }
    }
    r[0][1] = 0.5 * (r[0][1] + r[1][0]);
    r[1][0] = r[0][1];
    r
}

pub fn scalar_curvature(f: &FTensor, jet: &PotentialJet) -> f64 {
    trace(&ricci(f, jet), &jet.hess_inv)
}

/// `ρ = Ric - (S/2) φ_ab`.
pub fn trace_free_ricci(f: &FTensor, jet: &PotentialJet, s: f64) -> Mat2 {
    let r = ricci(f, jet);
    let mut rho = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            rho[a][b] = r[a][b] - 0.5 * s * jet.d2[a][b];
        }
    }
    rho
}

/// `|ρ|` in the normalization used by the norm identity.
pub fn rho_norm(rho: &Mat2, jet: &PotentialJet) -> f64 {
    (2.0 * contract2(rho, rho, &jet.hess_inv)).max(0.0).sqrt()
}

pub fn gauss_curvature(f: &FTensor, jet: &PotentialJet) -> f64 {
    (f.0[0][0][1][1] - f.0[0][1][0][1]) / det2(&jet.d2)
}

/// The part of `F` orthogonal to everything detected by its contractions.
#[derive(Clone, Copy, Debug)]
pub struct WeylComponent {
    pub tensor: FTensor,
    pub norm: f64,
}

pub fn weyl_component(f: &FTensor, jet: &PotentialJet) -> WeylComponent {
    let g = &jet.hess_inv;
    let det = det2(&jet.d2);
    let basis: Vec<FTensor> = (0..6)
        .map(|i| {
            let mut c = [0.0; 6];
            c[i] = 1.0;
            FTensor::from_components(c)
        })
        .collect();
    let gram = SMatrix::<f64, 6, 6>::from_fn(|i, j| basis[i].inner(&basis[j], g));
    let eps = [[0.0, 1.0], [-1.0, 0.0]];
    let cons = SMatrix::<f64, 4, 6>::from_fn(|r, k| {
        let x = &basis[k].0;
        if r < 3 {
            let (a, b) = PAIRS[r];
            let mut s = 0.0;
            for c in 0..2 {
                for d in 0..2 {
                    s += x[a][b][c][d] * g[c][d];
                }
            }
            s
        } else {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        for d in 0..2 {
                            s += eps[a][c] * eps[b][d] * x[a][b][c][d];
                        }
                    }
                }
            }
            s / det
        }
    });
    let gram_inv = gram.try_inverse().unwrap_or_else(SMatrix::zeros);
    let m = cons * gram_inv * cons.transpose();
    let m_pinv = m.pseudo_inverse(1e-14 * m.norm()).unwrap_or_else(|_| SMatrix::zeros());
    let proj = SMatrix::<f64, 6, 6>::identity() - gram_inv * cons.transpose() * m_pinv * cons;
    let w = proj * SVector::<f64, 6>::from(f.components());
    let norm_sq = (w.transpose() * gram * w)[(0, 0)];
    let mut c = [0.0; 6];
    c.copy_from_slice(w.as_slice());
    WeylComponent {
        tensor: FTensor::from_components(c),
        norm: norm_sq.max(0.0).sqrt(),
    }
}

/// `S²/3 + (S-6K)²/24 + |w|² + |ρ|²/2`.
pub fn riem_norm_sq(s: f64, k: f64, rho_norm: f64, w_norm: f64) -> f64 {
    s * s / 3.0 + (s - 6.0 * k).powi(2) / 24.0 + w_norm * w_norm + 0.5 * rho_norm * rho_norm
}

/// `|F|²`, the direct contraction; equals [`riem_norm_sq`] of the components.
pub fn full_norm_sq(f: &FTensor, jet: &PotentialJet) -> f64 {
    f.inner(f, &jet.hess_inv)
}

/// Pointwise curvature summary.
#[derive(Clone, Copy, Debug)]
pub struct CurvatureSample {
    pub x: [f64; 2],
    pub scalar: f64,
    pub gauss: f64,
    pub rho: Mat2,
    pub rho_norm: f64,
    pub w_norm: f64,
    pub riem_sq: f64,
    /// `S - A(x)`; NaN when no affine function was supplied.
    pub s_hat: f64,
}

impl CurvatureSample {
    pub fn from_jet(jet: &PotentialJet) -> Self {
        let f = FTensor::from_jet(jet);
        let s = scalar_curvature(&f, jet);
        let k = gauss_curvature(&f, jet);
        let rho = trace_free_ricci(&f, jet, s);
        let rn = rho_norm(&rho, jet);
        let w = weyl_component(&f, jet);
        CurvatureSample {
            x: jet.x,
            scalar: s,
            gauss: k,
            rho,
            rho_norm: rn,
            w_norm: w.norm,
            riem_sq: riem_norm_sq(s, k, rn, w.norm),
            s_hat: f64::NAN,
        }
    }

    pub fn with_affine(jet: &PotentialJet, affine: &ExtremalAffine) -> Self {
        let mut c = Self::from_jet(jet);
        c.s_hat = c.scalar - affine.eval(jet.x);
        c
    }

    pub fn riem_norm(&self) -> f64 {
        self.riem_sq.max(0.0).sqrt()
    }

    /// Values for the metric rescaled by `λ` (so `S ↦ S/λ`).
    pub fn rescaled(&self, lambda: f64) -> Self {
        let mut c = *self;
        c.scalar /= lambda;
        c.gauss /= lambda;
        c.rho_norm /= lambda;
        c.w_norm /= lambda;
        c.riem_sq /= lambda * lambda;
        c.s_hat /= lambda;
        c
    }
}

/// Bach tensor in the chart frame together with its norm.
#[derive(Clone, Copy, Debug)]
pub struct BachSample {
    pub tensor: Mat2,
    pub norm: f64,
    /// Second derivatives of `S` in chart coordinates.
    pub hessian_s: Mat2,
}

/// Scalar curvature at a chart point.
pub fn scalar_at(coeffs: &CoefficientSet, chart: &VertexChart, t_chart: [f64; 2], truncation: f64) -> Result<f64> {
    let jet = eval_jet(coeffs, chart, t_chart, truncation)?;
    Ok(scalar_curvature(&FTensor::from_jet(&jet), &jet))
}

/// Largest finite-difference step accepted by [`bach_tensor`].
pub const MAX_FD_STEP: f64 = 0.1;

const STENCIL_GRID: f64 = 4294967296.0;

/// Second derivatives of `S` in the coordinates of `chart`. The central
/// difference stencil of step `h` runs along the original `t` axes and is
/// evaluated in the atlas chart selected for the point, so the result only
/// depends on the point and not on the chart used to reach it.
pub fn hessian_of_scalar(
    coeffs: &CoefficientSet,
    atlas: &Atlas,
    chart: &VertexChart,
    t_chart: [f64; 2],
    h: f64,
    truncation: f64,
) -> Result<Mat2> {
    if !(h > 0.0 && h <= MAX_FD_STEP) {
        return Err(Error::StepTooLarge(h));
    }
    // snapping the centre to a dyadic grid hands every chart the same bits
    let snap = |v: f64| (v * STENCIL_GRID).round() / STENCIL_GRID;
    let t = chart.from_chart(t_chart).map(snap);
    let canon = &atlas.charts[atlas.select_chart(t)?];
    let s = |d0: f64, d1: f64| scalar_at(coeffs, canon, canon.to_chart([t[0] + d0, t[1] + d1]), truncation);
    let s0 = s(0.0, 0.0)?;
    let h2 = h * h;
    let s11 = (s(h, 0.0)? - 2.0 * s0 + s(-h, 0.0)?) / h2;
    let s22 = (s(0.0, h)? - 2.0 * s0 + s(0.0, -h)?) / h2;
    let s12 = (s(h, h)? - s(h, -h)? - s(-h, h)? + s(-h, -h)?) / (4.0 * h2);
    // H_chart = M^{-T} H_orig M^{-1} for t_chart = M t + const
    let mi = inv2(&chart.frame());
    let orig = [[s11, s12], [s12, s22]];
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut v = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    v += mi[i][a] * orig[i][j] * mi[j][b];
                }
            }
            out[a][b] = v;
        }
    }
    Ok(out)
}

/// `B = ½Sρ + S_ab`, returned φ-trace-free. ρ here is twice the Kähler trace-free Ricci of the t-block.
pub fn bach_tensor(
    coeffs: &CoefficientSet,
    atlas: &Atlas,
    chart: &VertexChart,
    t_chart: [f64; 2],
    fd_step: f64,
    truncation: f64,
) -> Result<BachSample> {
    let hs = hessian_of_scalar(coeffs, atlas, chart, t_chart, fd_step, truncation)?;
    let jet = eval_jet(coeffs, chart, t_chart, truncation)?;
    let f = FTensor::from_jet(&jet);
    let s = scalar_curvature(&f, &jet);
    let rho = trace_free_ricci(&f, &jet, s);
    let g = &jet.hess_inv;
    let lap = trace(&hs, g);
    let mut b = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            b[i][j] = 0.5 * s * rho[i][j] + hs[i][j] - 0.5 * lap * jet.d2[i][j];
        }
    }
    let tr = trace(&b, g);
    for i in 0..2 {
        for j in 0..2 {
            b[i][j] -= 0.5 * tr * jet.d2[i][j];
        }
    }
    Ok(BachSample {
        tensor: b,
        // same (1,1)-form norm as rho_norm
        norm: (2.0 * contract2(&b, &b, g)).max(0.0).sqrt(),
        hessian_s: hs,
    })
}
