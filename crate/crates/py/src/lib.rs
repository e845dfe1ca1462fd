//! Python bindings for `toric-core`.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use toric_core::curvature::{bach_tensor, CurvatureSample};
use toric_core::geodesics::GeodesicFlow;
use toric_core::quadrature as quad;
use toric_core::report::{invert_moment_map, summarize};
use toric_core::solver::{self, CorrectionUpdate, SolverConfig};
use toric_core::{Atlas, Error};

create_exception!(toric, DivergedError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Diverged { .. } | Error::InvalidCorrection { .. } => DivergedError::new_err(e.to_string()),
        Error::Config(_)
        | Error::UnknownPreset(_)
        | Error::TooFewVertices(_)
        | Error::NotConvex { .. }
        | Error::NotCounterclockwise
        | Error::NotDelzant { .. }
        | Error::ExceedsBoundingSquare { .. }
        | Error::CoefficientMismatch(_)
        | Error::OnBoundary(_)
        | Error::StepTooLarge(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serialises through JSON so the dict keys match the summary files.
fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A Delzant lattice polygon inside `[0, k]^2`.
#[pyclass(name = "Polygon", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPolygon {
    inner: Arc<toric_core::Polygon>,
}

#[pymethods]
impl PyPolygon {
    #[new]
    #[pyo3(signature = (vertices, k, name = "custom"))]
    fn new(vertices: Vec<[i64; 2]>, k: i64, name: &str) -> PyResult<Self> {
        let p = toric_core::Polygon::named(name, vertices, k).map_err(to_py)?;
        Ok(PyPolygon { inner: Arc::new(p) })
    }

    /// pentagon, hexagon, heptagon or octagon, optionally rescaled to side `k`.
    #[staticmethod]
    #[pyo3(signature = (name, k = None))]
    fn preset(name: &str, k: Option<i64>) -> PyResult<Self> {
        let p = match k {
            Some(k) => toric_core::Polygon::preset_with_k(name, k),
            None => toric_core::Polygon::preset(name),
        }
        .map_err(to_py)?;
        Ok(PyPolygon { inner: Arc::new(p) })
    }

    fn rescaled(&self, k: i64) -> PyResult<Self> {
        Ok(PyPolygon { inner: Arc::new(self.inner.rescaled_to(k).map_err(to_py)?) })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }
    #[getter]
    fn k(&self) -> i64 {
        self.inner.k()
    }
    #[getter]
    fn vertices(&self) -> Vec<[i64; 2]> {
        self.inner.vertices().to_vec()
    }
    #[getter]
    fn area(&self) -> f64 {
        self.inner.area()
    }
    #[getter]
    fn centroid(&self) -> [f64; 2] {
        self.inner.centroid()
    }
    #[getter]
    fn lattice_points(&self) -> Vec<[i64; 2]> {
        self.inner.lattice_points().to_vec()
    }

    /// Coefficients `(c0, c1, c2)` of the affine function `A = c0 + c1 x1 + c2 x2`.
    fn extremal_affine(&self) -> PyResult<[f64; 3]> {
        Ok(self.inner.extremal_affine().map_err(to_py)?.coefficients)
    }

    fn __repr__(&self) -> String {
        format!("Polygon({:?}, k={}, vertices={:?})", self.inner.name(), self.inner.k(), self.inner.vertices())
    }
}

/// Positive coefficients `a_ν`, one per lattice point.
#[pyclass(name = "Coefficients", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCoefficients {
    inner: toric_core::CoefficientSet,
}

impl PyCoefficients {
    fn wrap(inner: toric_core::CoefficientSet) -> Self {
        PyCoefficients { inner }
    }
}

#[pymethods]
impl PyCoefficients {
    #[new]
    fn new(polygon: &PyPolygon, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self::wrap(toric_core::CoefficientSet::new(polygon.inner.clone(), values).map_err(to_py)?))
    }

    #[staticmethod]
    fn ones(polygon: &PyPolygon) -> Self {
        Self::wrap(toric_core::CoefficientSet::ones(polygon.inner.clone()))
    }

    #[staticmethod]
    fn from_logs(polygon: &PyPolygon, logs: Vec<f64>) -> PyResult<Self> {
        Ok(Self::wrap(toric_core::CoefficientSet::from_logs(polygon.inner.clone(), logs).map_err(to_py)?))
    }

    /// Fubini-Study coefficients on the triangle of side `k`.
    #[staticmethod]
    fn multinomial_triangle(k: i64) -> PyResult<Self> {
        Ok(Self::wrap(toric_core::CoefficientSet::multinomial_triangle(k).map_err(to_py)?))
    }

    #[staticmethod]
    fn binomial_rectangle(m1: i64, m2: i64) -> PyResult<Self> {
        Ok(Self::wrap(toric_core::CoefficientSet::binomial_rectangle(m1, m2).map_err(to_py)?))
    }

    #[getter]
    fn polygon(&self) -> PyPolygon {
        PyPolygon { inner: self.inner.polygon().clone() }
    }
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }
    #[getter]
    fn logs(&self) -> Vec<f64> {
        self.inner.logs().to_vec()
    }

    fn get(&self, nu: [i64; 2]) -> Option<f64> {
        self.inner.index_of(nu).map(|i| self.inner.values()[i])
    }

    /// Multiplies `a_ν` by `exp(α0 + α1 ν1 + α2 ν2)`.
    fn twist(&self, alpha: [f64; 3]) -> Self {
        Self::wrap(self.inner.twist(alpha))
    }

    fn normalize(&self) -> PyResult<Self> {
        Ok(Self::wrap(self.inner.normalize().map_err(to_py)?))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Curvature at the point `x` of the polygon; values are for the metric as given.
    fn curvature_at<'py>(&self, py: Python<'py>, x: [f64; 2]) -> PyResult<Bound<'py, PyDict>> {
        let poly = self.inner.polygon();
        let atlas = Atlas::build(poly);
        let affine = poly.extremal_affine().map_err(to_py)?;
        let (jet, t) = invert_moment_map(&self.inner, &atlas, x).map_err(to_py)?;
        let c = CurvatureSample::with_affine(&jet, &affine);
        let d = PyDict::new(py);
        d.set_item("t", t)?;
        d.set_item("S", c.scalar)?;
        d.set_item("Shat", c.s_hat)?;
        d.set_item("K", c.gauss)?;
        d.set_item("rho_norm", c.rho_norm)?;
        d.set_item("w_norm", c.w_norm)?;
        d.set_item("riem_norm", c.riem_norm())?;
        Ok(d)
    }

    /// Norm of the Bach tensor at `x`.
    #[pyo3(signature = (x, fd_step = 1e-3))]
    fn bach_norm_at(&self, x: [f64; 2], fd_step: f64) -> PyResult<f64> {
        let atlas = Atlas::build(self.inner.polygon());
        let (jet, _) = invert_moment_map(&self.inner, &atlas, x).map_err(to_py)?;
        let chart = &atlas.charts[jet.chart];
        Ok(bach_tensor(&self.inner, &atlas, chart, jet.t_chart, fd_step, 0.0).map_err(to_py)?.norm)
    }

    /// Geodesic with angular momenta `j` from `x0`; rows are `(time, t1, t2, x1, x2, H)`.
    #[pyo3(signature = (x0, p0, j = [0.0, 0.0], dt = 1e-2, steps = 1000, every = 10))]
    fn geodesic(
        &self,
        x0: [f64; 2],
        p0: [f64; 2],
        j: [f64; 2],
        dt: f64,
        steps: usize,
        every: usize,
    ) -> PyResult<Vec<(f64, f64, f64, f64, f64, f64)>> {
        let atlas = Atlas::build(self.inner.polygon());
        let (_, t0) = invert_moment_map(&self.inner, &atlas, x0).map_err(to_py)?;
        let flow = GeodesicFlow::new(&self.inner, &atlas);
        let init = flow.state(t0, p0, j).map_err(to_py)?;
        let rows = flow.trace(&init, steps, dt, every).map_err(to_py)?;
        Ok(rows.iter().map(|r| (r.time, r.t1, r.t2, r.x1, r.x2, r.h)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Coefficients({} on {}, max {:.6}, min {:.6})", self.inner.len(), self.inner.polygon().name(), self.inner.max(), self.inner.min())
    }
}

/// Quadrature grid over the polygon, mapped to `t` space.
#[pyclass(name = "Quadrature", frozen)]
struct PyQuadrature {
    inner: quad::QuadratureScheme,
}

#[pymethods]
impl PyQuadrature {
    #[new]
    #[pyo3(signature = (polygon, h = None, b = quad::DEFAULT_B))]
    fn new(polygon: &PyPolygon, h: Option<f64>, b: f64) -> PyResult<Self> {
        let h = h.unwrap_or_else(|| quad::default_h(&polygon.inner));
        Ok(PyQuadrature { inner: quad::QuadratureScheme::build(polygon.inner.clone(), h, b).map_err(to_py)? })
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn area(&self, c: &PyCoefficients) -> PyResult<f64> {
        self.inner.area(&c.inner).map_err(to_py)
    }

    fn average_scalar(&self, c: &PyCoefficients) -> PyResult<f64> {
        self.inner.average_scalar(&c.inner).map_err(to_py)
    }

    /// Discrete Chern-Weil integral minus `p - 6`.
    fn chern_weil_check(&self, c: &PyCoefficients) -> PyResult<f64> {
        self.inner.chern_weil_check(&c.inner).map_err(to_py)
    }

    fn error_measures<'py>(&self, py: Python<'py>, c: &PyCoefficients) -> PyResult<Bound<'py, PyAny>> {
        let m = solver::error_measures(&self.inner, &c.inner, toric_core::potential::DEFAULT_TRUNCATION).map_err(to_py)?;
        to_dict(py, &m)
    }

    /// The same fields as `summary.json` written by the command-line tool.
    fn summary<'py>(&self, py: Python<'py>, c: &PyCoefficients) -> PyResult<Bound<'py, PyAny>> {
        let s = summarize(&self.inner, &c.inner, toric_core::potential::DEFAULT_TRUNCATION).map_err(to_py)?;
        to_dict(py, &s)
    }

    /// One application of `T` with zero corrections.
    fn t_map(&self, c: &PyCoefficients) -> PyResult<(PyCoefficients, f64)> {
        let eps = vec![0.0; c.inner.len()];
        let s = solver::t_map(&self.inner, &c.inner, &eps, toric_core::potential::DEFAULT_TRUNCATION, None).map_err(to_py)?;
        Ok((PyCoefficients::wrap(s.coeffs), s.max_ratio_dev))
    }

    /// Iterates to the balanced metric; returns `(coefficients, converged, steps)`.
    #[pyo3(signature = (start = None, tol = 0.0008, max_iter = 10_000, symmetry = false))]
    fn balance(
        &self,
        py: Python<'_>,
        start: Option<&PyCoefficients>,
        tol: f64,
        max_iter: usize,
        symmetry: bool,
    ) -> PyResult<(PyCoefficients, bool, usize)> {
        let start = start.map_or_else(|| toric_core::CoefficientSet::ones(self.inner.polygon().clone()), |c| c.inner.clone());
        let cfg = SolverConfig { symmetry, ..SolverConfig::default() };
        let out = py.detach(|| solver::balance(&self.inner, start, tol, max_iter, &cfg)).map_err(to_py)?;
        Ok((PyCoefficients::wrap(out.state.coeffs), out.converged, out.state.inner_step))
    }

    /// Balances from `start` (or the all-ones set), then refines. Returns a dict
    /// with `coefficients`, `stop_reason`, `outer_steps` and the per-step `history`.
    #[pyo3(signature = (start = None, c = 0.75, c_prime = 0.0008, eta_tol = None, outer_cap = 5000, symmetry = false, literal_shift = None))]
    #[allow(clippy::too_many_arguments)]
    fn refine<'py>(
        &self,
        py: Python<'py>,
        start: Option<&PyCoefficients>,
        c: f64,
        c_prime: f64,
        eta_tol: Option<f64>,
        outer_cap: usize,
        symmetry: bool,
        literal_shift: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let update = literal_shift.map_or(CorrectionUpdate::LocalMean, |log_shift| CorrectionUpdate::Literal { log_shift });
        let cfg = SolverConfig { c, c_prime, eta_tol, outer_cap, symmetry, update, ..SolverConfig::default() };
        let start = start.map_or_else(|| toric_core::CoefficientSet::ones(self.inner.polygon().clone()), |c| c.inner.clone());
        let (state, reason) = py
            .detach(|| -> toric_core::Result<_> {
                let b = solver::balance(&self.inner, start, cfg.c_prime, 10_000, &cfg)?;
                solver::refine(&self.inner, b.state, &cfg, |_| Ok(()))
            })
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("stop_reason", format!("{reason:?}"))?;
        d.set_item("outer_steps", state.outer_step)?;
        d.set_item("inner_steps", state.inner_step)?;
        d.set_item("history", to_dict(py, &state.history)?)?;
        d.set_item("coefficients", Py::new(py, PyCoefficients::wrap(state.coeffs))?)?;
        Ok(d)
    }
}

#[pymodule]
fn toric(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPolygon>()?;
    m.add_class::<PyCoefficients>()?;
    m.add_class::<PyQuadrature>()?;
    m.add("DivergedError", m.py().get_type::<DivergedError>())?;
    m.add("PRESETS", toric_core::polygon::PRESET_NAMES.to_vec())?;
    Ok(())
}
