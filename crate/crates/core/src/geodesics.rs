//! Geodesics of the torus-invariant metric with the angular momenta `J`
//! held fixed, so that only the motion in `t` remains:
//! `H(t, p) = ½ φ^{ab}(t) (p_a p_b + J_a J_b)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{Atlas, CoefficientSet, PotentialJet, DEFAULT_TRUNCATION};
use crate::tensor::Mat2;

/// Relative energy change above which a step is rejected.
pub const ENERGY_JUMP_TOL: f64 = 1e-6;
pub const DEFAULT_DT: f64 = 1e-2;
/// Halvings attempted by [`GeodesicFlow::trace`] before giving up on a step.
pub const MAX_HALVINGS: u32 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub t: [f64; 2],
    pub p: [f64; 2],
    pub j: [f64; 2],
    pub h: f64,
    pub time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub t1: f64,
    pub t2: f64,
    pub x1: f64,
    pub x2: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

pub struct GeodesicFlow<'a> {
    pub coeffs: &'a CoefficientSet,
    pub atlas: &'a Atlas,
    pub truncation: f64,
}

impl<'a> GeodesicFlow<'a> {
    pub fn new(coeffs: &'a CoefficientSet, atlas: &'a Atlas) -> Self {
        GeodesicFlow {
            coeffs,
            atlas,
            truncation: DEFAULT_TRUNCATION,
        }
    }

    /// Jet with derivatives taken in the original `t` coordinates.
    pub fn jet(&self, t: [f64; 2]) -> Result<PotentialJet> {
        let i = self.atlas.select_chart(t)?;
        let chart = &self.atlas.charts[i];
        let jet = crate::potential::eval_jet(self.coeffs, chart, chart.to_chart(t), self.truncation)?;
        Ok(jet.pulled_back(&chart.frame()))
    }

    pub fn hamiltonian(&self, t: [f64; 2], p: [f64; 2], j: [f64; 2]) -> Result<f64> {
        let g = self.jet(t)?.hess_inv;
        Ok(0.5 * (quad(&g, p) + quad(&g, j)))
    }

    pub fn state(&self, t: [f64; 2], p: [f64; 2], j: [f64; 2]) -> Result<GeodesicState> {
        Ok(GeodesicState {
            t,
            p,
            j,
            h: self.hamiltonian(t, p, j)?,
            time: 0.0,
        })
    }

    /// `(ṫ, ṗ)` at `(t, p)`.
    pub fn vector_field(&self, t: [f64; 2], p: [f64; 2], j: [f64; 2]) -> Result<([f64; 2], [f64; 2])> {
        let jet = self.jet(t)?;
        let g = &jet.hess_inv;
        let tdot = [g[0][0] * p[0] + g[0][1] * p[1], g[1][0] * p[0] + g[1][1] * p[1]];
        let gj = [g[0][0] * j[0] + g[0][1] * j[1], g[1][0] * j[0] + g[1][1] * j[1]];
        let mut pdot = [0.0; 2];
        for (c, out) in pdot.iter_mut().enumerate() {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += jet.d3[a][b][c] * (tdot[a] * tdot[b] + gj[a] * gj[b]);
                }
            }
            *out = 0.5 * s;
        }
        Ok((tdot, pdot))
    }

    /// One classical Runge-Kutta step; rejected if the energy moves too much.
    pub fn step(&self, s: &GeodesicState, dt: f64) -> Result<GeodesicState> {
        let f = |t: [f64; 2], p: [f64; 2]| self.vector_field(t, p, s.j);
        let add = |x: [f64; 2], k: [f64; 2], c: f64| [x[0] + c * k[0], x[1] + c * k[1]];
        let (k1t, k1p) = f(s.t, s.p)?;
        let (k2t, k2p) = f(add(s.t, k1t, 0.5 * dt), add(s.p, k1p, 0.5 * dt))?;
        let (k3t, k3p) = f(add(s.t, k2t, 0.5 * dt), add(s.p, k2p, 0.5 * dt))?;
        let (k4t, k4p) = f(add(s.t, k3t, dt), add(s.p, k3p, dt))?;
        let comb = |x: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]| {
            [
                x[0] + dt / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0]),
                x[1] + dt / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1]),
            ]
        };
        let t = comb(s.t, k1t, k2t, k3t, k4t);
        let p = comb(s.p, k1p, k2p, k3p, k4p);
        let h = self.hamiltonian(t, p, s.j)?;
        let jump = if s.h > 0.0 { (h - s.h).abs() / s.h } else { (h - s.h).abs() };
        if !(jump <= ENERGY_JUMP_TOL) {
            return Err(Error::StepRejected { jump });
        }
        Ok(GeodesicState {
            t,
            p,
            j: s.j,
            // the reference energy is kept so drift is measured against the start
            h: s.h,
            time: s.time + dt,
        })
    }

    /// Advances by `dt`, splitting into halves on rejection.
    pub fn advance(&self, s: &GeodesicState, dt: f64) -> Result<GeodesicState> {
        self.advance_inner(s, dt, 0)
    }

    fn advance_inner(&self, s: &GeodesicState, dt: f64, depth: u32) -> Result<GeodesicState> {
        match self.step(s, dt) {
            Ok(n) => Ok(n),
            Err(Error::StepRejected { .. }) if depth < MAX_HALVINGS => {
                let mid = self.advance_inner(s, 0.5 * dt, depth + 1)?;
                self.advance_inner(&mid, 0.5 * dt, depth + 1)
            }
            Err(e) => Err(e),
        }
    }

    pub fn row(&self, s: &GeodesicState) -> Result<TrajectoryRow> {
        let x = self.jet(s.t)?.x;
        Ok(TrajectoryRow {
            time: s.time,
            t1: s.t[0],
            t2: s.t[1],
            x1: x[0],
            x2: x[1],
            h: self.hamiltonian(s.t, s.p, s.j)?,
        })
    }

    /// Integrates `steps` steps, recording every `sample_every`-th state (and the first).
    pub fn trace(
        &self,
        initial: &GeodesicState,
        steps: usize,
        dt: f64,
        sample_every: usize,
    ) -> Result<Vec<TrajectoryRow>> {
        let every = sample_every.max(1);
        let mut rows = vec![self.row(initial)?];
        let mut s = *initial;
        for n in 1..=steps {
            s = self.advance(&s, dt)?;
            if n % every == 0 {
                rows.push(self.row(&s)?);
            }
        }
        Ok(rows)
    }
}

fn quad(g: &Mat2, v: [f64; 2]) -> f64 {
    g[0][0] * v[0] * v[0] + 2.0 * g[0][1] * v[0] * v[1] + g[1][1] * v[1] * v[1]
}

/// `Γ^a_bc = ½ φ^{ad} φ_dbc` for the metric `φ_ab dt_a dt_b`.
pub fn christoffel(jet: &PotentialJet) -> [[[f64; 2]; 2]; 2] {
    let mut gamma = [[[0.0; 2]; 2]; 2];
    for (a, ga) in gamma.iter_mut().enumerate() {
        for b in 0..2 {
            for c in 0..2 {
                ga[b][c] = 0.5 * (0..2).map(|d| jet.hess_inv[a][d] * jet.d3[d][b][c]).sum::<f64>();
            }
        }
    }
    gamma
}
