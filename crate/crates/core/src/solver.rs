//! Balanced metrics and refined approximations.
//!
//! The map `T` sends normalized coefficients `a` to the normalization of
//! `(1 + ε_ν) / I_ν` with `I_ν = ∫ f_ν det∇²φ dt`. With `ε = 0` its fixed
//! points are the balanced metrics. The refinement loop alternates between
//! iterating `T_ε` to near a fixed point and updating `ε ← ε + c η` with the
//! error coefficients `η_μ = ∫ (S - A∘Dφ) f_μ det∇²φ dt`.

use serde::{Deserialize, Serialize};

use crate::curvature::{scalar_curvature, CurvatureSample, FTensor};
use crate::error::{Error, Result};
use crate::polygon::{AffineMap, ExtremalAffine};
use crate::potential::{eval_weights, jet_from_weights, lattice_orbits, CoefficientSet, DEFAULT_TRUNCATION};
use crate::quadrature::QuadratureScheme;
use crate::reduce::ordered_sum;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolverConfig {
    /// Correction gain.
    pub c: f64,
    /// Inner tolerance on `max |a**/a - 1|`.
    pub c_prime: f64,
    /// Stop once `max |η|` falls below this; `None` means `1e-7 (1 + avg S)`.
    pub eta_tol: Option<f64>,
    pub outer_cap: usize,
    pub truncation: f64,
    /// Average over the lattice symmetry group after each application of `T`.
    pub symmetry: bool,
    pub stagnation_window: usize,
    pub stagnation_tol: f64,
    pub divergence_factor: f64,
    /// Cap on inner iterations per outer step.
    pub max_inner: usize,
    pub update: CorrectionUpdate,
}

/// How error coefficients become correction increments.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub enum CorrectionUpdate {
    /// `ε += c η` with `η` evaluated for coefficients scaled by `e^{log_shift}`.
    Literal { log_shift: f64 },
    /// `ε += c η / I`, the `p_ν`-weighted local mean of `S - A`.
    LocalMean,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            c: 0.75,
            c_prime: 0.0008,
            eta_tol: None,
            outer_cap: 5000,
            truncation: DEFAULT_TRUNCATION,
            symmetry: false,
            stagnation_window: 10,
            stagnation_tol: 1e-7,
            divergence_factor: 10.0,
            max_inner: 10_000,
            update: CorrectionUpdate::LocalMean,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c", self.c),
            ("c_prime", self.c_prime),
            ("stagnation_tol", self.stagnation_tol),
            ("divergence_factor", self.divergence_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(t) = self.eta_tol {
            if !(t > 0.0) {
                return Err(Error::Config(format!("eta_tol must be positive, got {t}")));
            }
        }
        if !(self.truncation >= 0.0 && self.truncation < 1.0) {
            return Err(Error::Config(format!("truncation must lie in [0, 1), got {}", self.truncation)));
        }
        if self.outer_cap == 0 || self.max_inner == 0 || self.stagnation_window == 0 {
            return Err(Error::Config("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct HistoryRow {
    pub outer: usize,
    pub inner_total: usize,
    pub l2_error: f64,
    pub max_ratio_dev: f64,
    pub eta_max: f64,
}

#[derive(Clone, Debug)]
pub struct IterationState {
    pub coeffs: CoefficientSet,
    pub epsilon: Vec<f64>,
    pub eta: Vec<f64>,
    pub inner_step: usize,
    pub outer_step: usize,
    pub last_dev: f64,
    /// Smallest L² error seen so far, for the divergence check.
    pub l2_min: f64,
    pub history: Vec<HistoryRow>,
}

impl IterationState {
    pub fn new(coeffs: CoefficientSet) -> Result<Self> {
        let coeffs = coeffs.normalize()?;
        let n = coeffs.len();
        Ok(IterationState {
            coeffs,
            epsilon: vec![0.0; n],
            eta: vec![0.0; n],
            inner_step: 0,
            outer_step: 0,
            last_dev: f64::INFINITY,
            l2_min: f64::INFINITY,
            history: Vec::new(),
        })
    }
}

/// Why [`refine`] returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    EtaTolerance,
    Stagnation,
    OuterCap,
}

/// Integrals gathered in one pass over the nodes.
#[derive(Clone, Debug)]
pub struct NodeIntegrals {
    /// `I_ν`.
    pub i: Vec<f64>,
    /// `η_ν`; empty when not requested.
    pub eta: Vec<f64>,
    pub area: f64,
    pub int_s: f64,
    pub int_shat: f64,
    pub int_shat_sq: f64,
}

impl NodeIntegrals {
    pub fn average_scalar(&self) -> f64 {
        self.int_s / self.area
    }
    /// `√(avg Ŝ²)` for the metric rescaled to average scalar curvature one.
    pub fn l2_error(&self) -> f64 {
        (self.int_shat_sq / self.area).sqrt() / self.average_scalar()
    }
    pub fn eta_max(&self) -> f64 {
        self.eta.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn node_integrals(
    scheme: &QuadratureScheme,
    coeffs: &CoefficientSet,
    truncation: f64,
    affine: Option<&ExtremalAffine>,
) -> Result<NodeIntegrals> {
    if coeffs.polygon().vertices() != scheme.polygon().vertices() {
        return Err(Error::CoefficientMismatch("coefficients belong to a different polygon".into()));
    }
    let n = coeffs.len();
    let width = if affine.is_some() { 2 * n + 4 } else { n + 1 };
    let atlas = scheme.atlas();
    let acc = ordered_sum(scheme.nodes(), width, Vec::new, |node, w, acc| {
        let chart = &atlas.charts[node.chart];
        let ld = eval_weights(coeffs, chart, node.t_chart, truncation, w);
        let jet = jet_from_weights(chart, node.chart, node.t_chart, w, ld)?;
        let wt = node.static_weight * jet.hess_det();
        for (a, p) in acc[..n].iter_mut().zip(w.iter()) {
            *a += wt * p;
        }
        match affine {
            None => acc[n] += wt,
            Some(aff) => {
                let s = scalar_curvature(&FTensor::from_jet(&jet), &jet);
                let d = s - aff.eval(jet.x);
                let wd = wt * d;
                for (a, p) in acc[n..2 * n].iter_mut().zip(w.iter()) {
                    *a += wd * p;
                }
                let tail = &mut acc[2 * n..];
                tail[0] += wt;
                tail[1] += wt * s;
                tail[2] += wd;
                tail[3] += wd * d;
            }
        }
        Ok(())
    })?;
    let a = coeffs.values();
    let i: Vec<f64> = acc[..n].iter().zip(a).map(|(v, a)| v / a).collect();
    if let Some((index, &value)) = i.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositiveIntegral { index, value });
    }
    Ok(match affine {
        None => NodeIntegrals {
            i,
            eta: Vec::new(),
            area: acc[n],
            int_s: f64::NAN,
            int_shat: f64::NAN,
            int_shat_sq: f64::NAN,
        },
        Some(_) => NodeIntegrals {
            i,
            eta: acc[n..2 * n].iter().zip(a).map(|(v, a)| v / a).collect(),
            area: acc[2 * n],
            int_s: acc[2 * n + 1],
            int_shat: acc[2 * n + 2],
            int_shat_sq: acc[2 * n + 3],
        },
    })
}

/// `I_ν = ∫ f_ν det∇²φ dt`.
pub fn i_integrals(scheme: &QuadratureScheme, coeffs: &CoefficientSet, truncation: f64) -> Result<Vec<f64>> {
    Ok(node_integrals(scheme, coeffs, truncation, None)?.i)
}

/// `η_ν = ∫ (S - A∘Dφ) f_ν det∇²φ dt`.
pub fn error_coefficients(scheme: &QuadratureScheme, coeffs: &CoefficientSet, truncation: f64) -> Result<Vec<f64>> {
    let affine = scheme.polygon().extremal_affine()?;
    Ok(node_integrals(scheme, coeffs, truncation, Some(&affine))?.eta)
}

/// Result of one application of `T_ε`.
#[derive(Clone, Debug)]
pub struct TStep {
    pub coeffs: CoefficientSet,
    /// `max_ν |a**_ν / a_ν - 1|`.
    pub max_ratio_dev: f64,
}

pub fn t_map(
    scheme: &QuadratureScheme,
    coeffs: &CoefficientSet,
    epsilon: &[f64],
    truncation: f64,
    group: Option<&[AffineMap]>,
) -> Result<TStep> {
    if let Some((index, &value)) = epsilon.iter().enumerate().find(|(_, e)| !(1.0 + **e > 0.0)) {
        return Err(Error::InvalidCorrection { index, value });
    }
    let coeffs = &coeffs.normalize()?;
    let i = i_integrals(scheme, coeffs, truncation)?;
    let logs: Vec<f64> = i
        .iter()
        .zip(epsilon)
        .map(|(i, e)| (1.0 + e).ln() - i.ln())
        .collect();
    let mut next = CoefficientSet::from_logs(coeffs.polygon().clone(), logs)?.normalize()?;
    if let Some(g) = group {
        next = next.symmetric_average(g)?.normalize()?;
    }
    let max_ratio_dev = next
        .values()
        .iter()
        .zip(coeffs.values())
        .map(|(b, a)| (b / a - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(TStep {
        coeffs: next,
        max_ratio_dev,
    })
}

fn symmetry_group(scheme: &QuadratureScheme, cfg: &SolverConfig) -> Option<Vec<AffineMap>> {
    cfg.symmetry.then(|| scheme.polygon().lattice_symmetries())
}

/// Outcome of [`balance`].
#[derive(Clone, Debug)]
pub struct BalanceOutcome {
    pub state: IterationState,
    pub converged: bool,
}

/// Iterates `T` with `ε = 0` until the ratio deviation drops below `tol`.
pub fn balance(
    scheme: &QuadratureScheme,
    start: CoefficientSet,
    tol: f64,
    max_iter: usize,
    cfg: &SolverConfig,
) -> Result<BalanceOutcome> {
    cfg.validate()?;
    let group = symmetry_group(scheme, cfg);
    let mut state = IterationState::new(start)?;
    if let Some(g) = &group {
        state.coeffs = state.coeffs.symmetric_average(g)?.normalize()?;
    }
    let zero = vec![0.0; state.coeffs.len()];
    for _ in 0..max_iter {
        let step = t_map(scheme, &state.coeffs, &zero, cfg.truncation, group.as_deref())?;
        state.coeffs = step.coeffs;
        state.inner_step += 1;
        state.last_dev = step.max_ratio_dev;
        log::debug!("balance step {} dev {:.3e}", state.inner_step, step.max_ratio_dev);
        if step.max_ratio_dev < tol {
            return Ok(BalanceOutcome { state, converged: true });
        }
    }
    log::warn!("balance did not reach {tol:e} in {max_iter} steps (dev {:.3e})", state.last_dev);
    Ok(BalanceOutcome {
        state,
        converged: false,
    })
}

fn average_over_orbits(values: &mut [f64], orbits: &[Vec<usize>]) {
    for orbit in orbits {
        let mean = orbit.iter().map(|&i| values[i]).sum::<f64>() / orbit.len() as f64;
        for &i in orbit {
            values[i] = mean;
        }
    }
}

/// Runs the refinement loop from `state`. `observer` sees the state after
/// every outer step (after the correction update, so resuming from it
/// continues the same sequence).
pub fn refine(
    scheme: &QuadratureScheme,
    mut state: IterationState,
    cfg: &SolverConfig,
    mut observer: impl FnMut(&IterationState) -> Result<()>,
) -> Result<(IterationState, StopReason)> {
    cfg.validate()?;
    let affine = scheme.polygon().extremal_affine()?;
    let group = symmetry_group(scheme, cfg);
    let orbits = match &group {
        Some(g) => Some(lattice_orbits(scheme.polygon(), g)?),
        None => None,
    };
    loop {
        let mut inner = 0;
        loop {
            let step = t_map(scheme, &state.coeffs, &state.epsilon, cfg.truncation, group.as_deref())?;
            state.coeffs = step.coeffs;
            state.last_dev = step.max_ratio_dev;
            state.inner_step += 1;
            inner += 1;
            if step.max_ratio_dev <= cfg.c_prime || inner >= cfg.max_inner {
                break;
            }
        }
        let ints = node_integrals(scheme, &state.coeffs, cfg.truncation, Some(&affine))?;
        state.eta = ints.eta.clone();
        if let Some(o) = &orbits {
            average_over_orbits(&mut state.eta, o);
        }
        let l2 = ints.l2_error();
        let eta_max = state.eta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !l2.is_finite() {
            return Err(Error::NonFiniteResult("L2 error"));
        }
        state.outer_step += 1;
        state.history.push(HistoryRow {
            outer: state.outer_step,
            inner_total: state.inner_step,
            l2_error: l2,
            max_ratio_dev: state.last_dev,
            eta_max,
        });
        log::debug!(
            "outer {} inner {} l2 {:.6e} eta {:.3e}",
            state.outer_step,
            inner,
            l2,
            eta_max
        );
        state.l2_min = state.l2_min.min(l2);
        let eta_tol = cfg.eta_tol.unwrap_or(1e-7 * (1.0 + ints.average_scalar()));
        let w = cfg.stagnation_window;
        let stagnant = state.history.len() > w && {
            let old = state.history[state.history.len() - 1 - w].l2_error;
            ((l2 - old) / l2).abs() < cfg.stagnation_tol
        };
        let stop = if eta_max < eta_tol {
            Some(StopReason::EtaTolerance)
        } else if stagnant {
            Some(StopReason::Stagnation)
        } else if state.outer_step >= cfg.outer_cap {
            Some(StopReason::OuterCap)
        } else {
            None
        };
        // applied on the final step too, so a checkpoint taken there resumes seamlessly
        match cfg.update {
            CorrectionUpdate::Literal { log_shift } => {
                let g = cfg.c * (-log_shift).exp();
                for (e, h) in state.epsilon.iter_mut().zip(&state.eta) {
                    *e += g * h;
                }
            }
            CorrectionUpdate::LocalMean => {
                for ((e, h), i) in state.epsilon.iter_mut().zip(&state.eta).zip(&ints.i) {
                    *e += cfg.c * h / i;
                }
            }
        }
        observer(&state)?;
        if l2 > cfg.divergence_factor * state.l2_min {
            return Err(Error::Diverged {
                outer_step: state.outer_step,
                l2,
                l2_min: state.l2_min,
            });
        }
        if let Some(reason) = stop {
            return Ok((state, reason));
        }
    }
}

/// Summary statistics of `Ŝ = S - A` after rescaling to average `S = 1`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ErrorMeasures {
    pub l2: f64,
    pub err_max: f64,
    pub err_min: f64,
    pub norm_err_max: f64,
    pub norm_err_min: f64,
    pub coeff_max: f64,
    pub coeff_min: f64,
    pub average_scalar: f64,
}

/// Error measures computed from precomputed node samples.
pub fn error_measures_from_samples(
    coeffs: &CoefficientSet,
    samples: &[CurvatureSample],
    weights: &[f64],
) -> ErrorMeasures {
    let mut area = 0.0;
    let mut int_s = 0.0;
    let mut int_sq = 0.0;
    for (s, w) in samples.iter().zip(weights) {
        area += w;
        int_s += w * s.scalar;
        int_sq += w * s.s_hat * s.s_hat;
    }
    let lambda = int_s / area;
    let mut m = ErrorMeasures {
        l2: (int_sq / area).sqrt() / lambda,
        err_max: f64::NEG_INFINITY,
        err_min: f64::INFINITY,
        norm_err_max: f64::NEG_INFINITY,
        norm_err_min: f64::INFINITY,
        coeff_max: coeffs.max(),
        coeff_min: coeffs.min(),
        average_scalar: lambda,
    };
    for s in samples {
        let e = s.s_hat / lambda;
        let ne = s.s_hat / s.riem_norm();
        m.err_max = m.err_max.max(e);
        m.err_min = m.err_min.min(e);
        m.norm_err_max = m.norm_err_max.max(ne);
        m.norm_err_min = m.norm_err_min.min(ne);
    }
    m
}

pub fn error_measures(scheme: &QuadratureScheme, coeffs: &CoefficientSet, truncation: f64) -> Result<ErrorMeasures> {
    let samples = scheme.samples(coeffs, truncation)?;
    let weights = scheme.weights(coeffs, truncation)?;
    Ok(error_measures_from_samples(coeffs, &samples, &weights))
}
