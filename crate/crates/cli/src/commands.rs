use std::cell::RefCell;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use toric_core::curvature::CurvatureSample;
use toric_core::geodesics::GeodesicFlow;
use toric_core::io::{
    atomic_write, read_checkpoint, read_coefficients, write_checkpoint, write_coefficients, write_field, write_history,
    write_trajectory,
};
use toric_core::quadrature::QuadratureScheme;
use toric_core::report::{field_grid, invert_moment_map, summarize, Summary};
use toric_core::solver::{balance, refine, IterationState, StopReason};
use toric_core::{Atlas, CoefficientSet, Error, Polygon, Result};

use crate::config::RunConfig;

pub const AREA_TOL: f64 = 1e-4;
pub const CHERN_WEIL_TOL: f64 = 1e-3;
pub const EXACT_MODEL_TOL: f64 = 1e-8;

/// Exit status of a finished command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    ValidationFailed,
}

pub fn prepare_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    atomic_write(&cfg.out.join("config.json"), serde_json::to_string_pretty(cfg)?.as_bytes())
}

fn scheme(cfg: &RunConfig, poly: Arc<Polygon>) -> Result<QuadratureScheme> {
    let h = cfg.h / cfg.k as f64 * poly.k() as f64;
    QuadratureScheme::build(poly, h, cfg.b)
}

fn line(ok: bool, name: &str, detail: String) -> bool {
    println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

/// Nodes closer to the boundary than this fraction of `k` sit in the rounding regime.
pub const EXACT_MODEL_MARGIN: f64 = 1e-3;

/// Largest `|S - A| / A` over the quadrature nodes away from the boundary.
fn exact_model_residual(cfg: &RunConfig, c: &CoefficientSet) -> Result<f64> {
    let s = scheme(cfg, c.polygon().clone())?;
    let poly = c.polygon();
    let affine = poly.extremal_affine()?;
    let margin = EXACT_MODEL_MARGIN * poly.k() as f64;
    let mut worst = 0.0f64;
    for jet in s.jets(c, cfg.solver.truncation)? {
        if poly.min_edge_distance(jet.x) < margin {
            continue;
        }
        let a = affine.eval(jet.x);
        worst = worst.max(CurvatureSample::with_affine(&jet, &affine).s_hat.abs() / a);
    }
    Ok(worst)
}

pub fn validate(cfg: &RunConfig) -> Result<Status> {
    let poly = cfg.shape.clone();
    let mut ok = true;
    let s = match scheme(cfg, poly.clone()) {
        Ok(s) => s,
        Err(e @ Error::EmptyGrid(_)) => {
            line(false, "quadrature grid", e.to_string());
            return Ok(Status::ValidationFailed);
        }
        Err(e) => return Err(e),
    };
    let ones = CoefficientSet::ones(poly.clone());
    let area = s.area(&ones)? / poly.area() - 1.0;
    ok &= line(
        area.abs() <= AREA_TOL,
        "area",
        format!("relative error {area:.3e} with {} nodes at h = {}", s.len(), cfg.h),
    );
    let cw = s.chern_weil_check(&ones)?;
    ok &= line(
        cw.abs() <= CHERN_WEIL_TOL,
        "chern-weil",
        format!("residual {cw:.3e} against p - 6 = {}", poly.vertex_count() as i64 - 6),
    );
    let modulus = s.max_chart_modulus();
    let covered = s.nodes().iter().filter(|n| s.atlas().charts[n.chart].max_modulus(n.t) <= 1.0 + 1e-9).count();
    ok &= line(
        covered == s.len(),
        "chart cover",
        format!("{covered} of {} nodes inside their chart (max |z| = {modulus:.6})", s.len()),
    );
    for (name, c) in [
        ("exact model triangle", CoefficientSet::multinomial_triangle(3)?),
        ("exact model square", CoefficientSet::binomial_rectangle(3, 3)?),
    ] {
        match exact_model_residual(cfg, &c) {
            Ok(r) => ok &= line(r <= EXACT_MODEL_TOL, name, format!("max |S - A| / A = {r:.3e}")),
            Err(e @ Error::EmptyGrid(_)) => ok &= line(false, name, e.to_string()),
            Err(e) => return Err(e),
        }
    }
    Ok(if ok { Status::Ok } else { Status::ValidationFailed })
}

fn write_summary(cfg: &RunConfig, s: &QuadratureScheme, state: &IterationState, stop: &str) -> Result<Summary> {
    let mut sum = summarize(s, &state.coeffs, cfg.solver.truncation)?;
    sum.outer_steps = state.outer_step;
    sum.inner_steps = state.inner_step;
    sum.stop_reason = Some(stop.to_string());
    atomic_write(&cfg.out.join("summary.json"), serde_json::to_string_pretty(&sum)?.as_bytes())?;
    Ok(sum)
}

fn print_summary(sum: &Summary) {
    println!(
        "{} k={} outer={} inner={} stop={} l2={:.4e} err=[{:.4}, {:.4}] a=[{:.4}, {:.4}]",
        sum.polygon,
        sum.k,
        sum.outer_steps,
        sum.inner_steps,
        sum.stop_reason.as_deref().unwrap_or("-"),
        sum.errors.l2,
        sum.errors.err_min,
        sum.errors.err_max,
        sum.errors.coeff_min,
        sum.errors.coeff_max
    );
}

const BALANCE_MAX_ITER: usize = 10_000;

pub fn cmd_balance(cfg: &RunConfig) -> Result<Status> {
    prepare_out(cfg)?;
    let s = scheme(cfg, cfg.shape.clone())?;
    let out = balance(&s, CoefficientSet::ones(cfg.shape.clone()), cfg.solver.c_prime, BALANCE_MAX_ITER, &cfg.solver)?;
    write_coefficients(&cfg.out.join("coefficients.csv"), &out.state.coeffs)?;
    write_history(&cfg.out.join("iterations.csv"), &out.state.history)?;
    write_checkpoint(&cfg.out, &out.state)?;
    let stop = if out.converged { "Balanced" } else { "BalanceCap" };
    print_summary(&write_summary(cfg, &s, &out.state, stop)?);
    Ok(Status::Ok)
}

/// Runs balance then refine (or resumes), writing artifacts after every outer step.
pub fn run_refine(cfg: &RunConfig) -> Result<(Summary, StopReason)> {
    prepare_out(cfg)?;
    let s = scheme(cfg, cfg.shape.clone())?;
    let start = match &cfg.resume {
        Some(path) => read_checkpoint(path, cfg.shape.clone())?,
        None => {
            balance(&s, CoefficientSet::ones(cfg.shape.clone()), cfg.solver.c_prime, BALANCE_MAX_ITER, &cfg.solver)?.state
        }
    };
    let last = RefCell::new(start.clone());
    let save = |st: &IterationState| -> Result<()> {
        write_checkpoint(&cfg.out, st)?;
        write_history(&cfg.out.join("iterations.csv"), &st.history)?;
        write_coefficients(&cfg.out.join("coefficients.csv"), &st.coeffs)?;
        log::info!("outer {} l2 {:.6e}", st.outer_step, st.history.last().map_or(f64::NAN, |r| r.l2_error));
        *last.borrow_mut() = st.clone();
        Ok(())
    };
    match refine(&s, start, &cfg.solver, save) {
        Ok((state, reason)) => {
            let sum = write_summary(cfg, &s, &state, &format!("{reason:?}"))?;
            Ok((sum, reason))
        }
        Err(e @ Error::Diverged { .. }) => {
            // keep what was written and record where it stopped
            let st = last.into_inner();
            if let Err(w) = write_summary(cfg, &s, &st, "Diverged") {
                log::warn!("could not summarise diverged run: {w}");
            }
            Err(e)
        }
        Err(e) => Err(e),
    }
}

pub fn cmd_refine(cfg: &RunConfig) -> Result<Status> {
    let (sum, _) = run_refine(cfg)?;
    print_summary(&sum);
    Ok(Status::Ok)
}

pub fn default_coeffs_path(cfg: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    explicit.map_or_else(|| cfg.out.join("coefficients.csv"), Path::to_path_buf)
}

pub fn cmd_report(cfg: &RunConfig, coeffs: &Path, spacing: Option<f64>, bach: bool) -> Result<Status> {
    let c = read_coefficients(coeffs, cfg.shape.clone())?;
    fs::create_dir_all(&cfg.out)?;
    let spacing = spacing.unwrap_or(cfg.k as f64 / 40.0);
    if !(spacing > 0.0) {
        return Err(Error::Config(format!("--spacing must be positive, got {spacing}")));
    }
    let s = scheme(cfg, cfg.shape.clone())?;
    let lambda = s.average_scalar(&c)?;
    let rep = field_grid(&c, spacing, cfg.fd_step, lambda, bach)?;
    write_field(&cfg.out.join("field.csv"), &rep.rows)?;
    println!(
        "{} grid points, {} Newton failures, average S = {lambda:.6}",
        rep.rows.len(),
        rep.failures
    );
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct ConvergenceRow {
    k: i64,
    l2: f64,
    outer_steps: usize,
    status: String,
}

/// Refines every `k`; failures are recorded and the sweep goes on. Returns the first error, if any.
pub fn cmd_convergence(cfg: &RunConfig, ks: &[i64]) -> Result<(Status, Option<Error>)> {
    fs::create_dir_all(&cfg.out)?;
    let mut rows = Vec::new();
    let mut first_err = None;
    for &k in ks {
        let poly = match cfg.shape.rescaled_to(k) {
            Ok(p) => Arc::new(p),
            Err(e) => {
                rows.push(ConvergenceRow { k, l2: f64::NAN, outer_steps: 0, status: e.to_string() });
                first_err.get_or_insert(e);
                continue;
            }
        };
        let mut sub = cfg.clone();
        sub.h = cfg.h / cfg.k as f64 * k as f64;
        sub.k = k;
        sub.vertices = poly.vertices().to_vec();
        sub.shape = poly;
        sub.out = cfg.out.join(format!("k{k}"));
        sub.resume = None;
        match run_refine(&sub) {
            Ok((sum, reason)) => {
                println!("k={k} l2={:.4e} outer={} ({reason:?})", sum.errors.l2, sum.outer_steps);
                rows.push(ConvergenceRow { k, l2: sum.errors.l2, outer_steps: sum.outer_steps, status: format!("{reason:?}") });
            }
            Err(e) => {
                println!("k={k} failed: {e}");
                rows.push(ConvergenceRow { k, l2: f64::NAN, outer_steps: 0, status: e.to_string() });
                first_err.get_or_insert(e);
            }
        }
    }
    let mut text = String::from("k,l2,outer_steps,status\n");
    for r in &rows {
        text.push_str(&format!("{},{:.6e},{},\"{}\"\n", r.k, r.l2, r.outer_steps, r.status.replace('"', "'")));
    }
    atomic_write(&cfg.out.join("convergence.csv"), text.as_bytes())?;
    Ok((Status::Ok, first_err))
}

pub struct GeodesicArgs {
    pub x0: [f64; 2],
    pub p0: [f64; 2],
    pub j: [f64; 2],
    pub dt: f64,
    pub steps: usize,
    pub every: usize,
}

pub fn cmd_geodesic(cfg: &RunConfig, coeffs: Option<&Path>, g: &GeodesicArgs) -> Result<Status> {
    let c = match coeffs {
        Some(p) => read_coefficients(p, cfg.shape.clone())?,
        None => CoefficientSet::ones(cfg.shape.clone()),
    };
    if !(g.dt > 0.0) {
        return Err(Error::Config(format!("--dt must be positive, got {}", g.dt)));
    }
    fs::create_dir_all(&cfg.out)?;
    let atlas = Atlas::build(c.polygon());
    let (_, t0) = invert_moment_map(&c, &atlas, g.x0)?;
    let mut flow = GeodesicFlow::new(&c, &atlas);
    flow.truncation = cfg.solver.truncation;
    let init = flow.state(t0, g.p0, g.j)?;
    let rows = flow.trace(&init, g.steps, g.dt, g.every)?;
    write_trajectory(&cfg.out.join("trajectory.csv"), &rows)?;
    let drift = rows.last().map_or(0.0, |r| (r.h / init.h - 1.0).abs());
    println!("{} rows, relative energy drift {drift:.3e}", rows.len());
    Ok(Status::Ok)
}
