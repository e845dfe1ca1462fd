//! File formats: polygon JSON, coefficient and log CSVs, checkpoint sidecars.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::TrajectoryRow;
use crate::polygon::{Lattice, Polygon};
use crate::potential::CoefficientSet;
use crate::report::FieldRow;
use crate::solver::{HistoryRow, IterationState};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct PolygonFile {
    pub name: String,
    pub k: i64,
    pub vertices: Vec<Lattice>,
}

impl PolygonFile {
    pub fn from_polygon(p: &Polygon) -> Self {
        PolygonFile {
            name: p.name().to_string(),
            k: p.k(),
            vertices: p.vertices().to_vec(),
        }
    }

    pub fn into_polygon(self) -> Result<Polygon> {
        Polygon::named(&self.name, self.vertices, self.k)
    }
}

pub fn read_polygon(path: &Path) -> Result<Polygon> {
    let f: PolygonFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    f.into_polygon()
}

pub fn write_polygon(path: &Path, p: &Polygon) -> Result<()> {
    atomic_write(path, serde_json::to_string_pretty(&PolygonFile::from_polygon(p))?.as_bytes())
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn coefficients_csv(c: &CoefficientSet) -> String {
    let mut s = String::from("nu1,nu2,a\n");
    for (nu, a) in c.polygon().lattice_points().iter().zip(c.values()) {
        s.push_str(&format!("{},{},{:.16e}\n", nu[0], nu[1], a));
    }
    s
}

pub fn write_coefficients(path: &Path, c: &CoefficientSet) -> Result<()> {
    atomic_write(path, coefficients_csv(c).as_bytes())
}

#[derive(Deserialize)]
struct CoefficientRow {
    nu1: i64,
    nu2: i64,
    a: f64,
}

/// Reads a coefficient CSV for `polygon`; every lattice point must appear exactly once.
pub fn read_coefficients(path: &Path, polygon: Arc<Polygon>) -> Result<CoefficientSet> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let n = polygon.lattice_points().len();
    let mut values = vec![f64::NAN; n];
    let tmp = CoefficientSet::ones(polygon.clone());
    for row in rdr.deserialize() {
        let row: CoefficientRow = row.map_err(csv_err)?;
        let i = tmp
            .index_of([row.nu1, row.nu2])
            .ok_or_else(|| Error::CoefficientMismatch(format!("({}, {}) is not a lattice point", row.nu1, row.nu2)))?;
        if !values[i].is_nan() {
            return Err(Error::CoefficientMismatch(format!("({}, {}) listed twice", row.nu1, row.nu2)));
        }
        values[i] = row.a;
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        let nu = polygon.lattice_points()[i];
        return Err(Error::CoefficientMismatch(format!("missing lattice point {nu:?}")));
    }
    CoefficientSet::new(polygon, values)
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::Io(io);
        }
        unreachable!()
    }
    Error::Parse(e.to_string())
}

fn rows_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

fn headers_only(header: &str) -> Vec<u8> {
    format!("{header}\n").into_bytes()
}

pub const HISTORY_HEADER: &str = "outer,inner_total,l2_error,max_ratio_dev,eta_max";
pub const FIELD_HEADER: &str = "x1,x2,S,Shat,K,rho_norm,w_norm,riem_norm,bach_norm";
pub const TRAJECTORY_HEADER: &str = "time,t1,t2,x1,x2,H";

pub fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    let bytes = if rows.is_empty() { headers_only(HISTORY_HEADER) } else { rows_csv(rows)? };
    atomic_write(path, &bytes)
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    rdr.deserialize().map(|r| r.map_err(csv_err)).collect()
}

pub fn write_field(path: &Path, rows: &[FieldRow]) -> Result<()> {
    let bytes = if rows.is_empty() { headers_only(FIELD_HEADER) } else { rows_csv(rows)? };
    atomic_write(path, &bytes)
}

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let bytes = if rows.is_empty() { headers_only(TRAJECTORY_HEADER) } else { rows_csv(rows)? };
    atomic_write(path, &bytes)
}

/// Rows kept in the sidecar; more than any stagnation window in use.
pub const HISTORY_TAIL: usize = 64;

/// JSON stored next to the coefficient CSV of a checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub epsilon: Vec<f64>,
    pub outer_step: usize,
    pub history_tail: Vec<HistoryRow>,
    pub inner_total: usize,
    pub l2_min: f64,
    pub last_dev: f64,
    /// Exact `log a`; the CSV values alone lose the last bit of the logs.
    pub log_a: Vec<f64>,
}

impl Checkpoint {
    pub fn from_state(state: &IterationState) -> Self {
        let tail = state.history.len().saturating_sub(HISTORY_TAIL);
        Checkpoint {
            epsilon: state.epsilon.clone(),
            outer_step: state.outer_step,
            history_tail: state.history[tail..].to_vec(),
            inner_total: state.inner_step,
            l2_min: state.l2_min,
            last_dev: state.last_dev,
            log_a: state.coeffs.logs().to_vec(),
        }
    }

    /// Rebuilds the state; `full_history` replaces the tail when available.
    pub fn into_state(self, polygon: Arc<Polygon>, full_history: Option<Vec<HistoryRow>>) -> Result<IterationState> {
        let n = polygon.lattice_points().len();
        if self.epsilon.len() != n || self.log_a.len() != n {
            return Err(Error::CoefficientMismatch(format!(
                "checkpoint holds {} corrections and {} coefficients for {n} lattice points",
                self.epsilon.len(),
                self.log_a.len()
            )));
        }
        let coeffs = CoefficientSet::from_logs(polygon, self.log_a)?;
        let history = match full_history {
            Some(h) => h.into_iter().filter(|r| r.outer <= self.outer_step).collect(),
            None => self.history_tail,
        };
        Ok(IterationState {
            coeffs,
            epsilon: self.epsilon,
            eta: vec![0.0; n],
            inner_step: self.inner_total,
            outer_step: self.outer_step,
            last_dev: self.last_dev,
            l2_min: self.l2_min,
            history,
        })
    }
}

pub fn checkpoint_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join("checkpoint.csv"), dir.join("checkpoint.json"))
}

pub fn write_checkpoint(dir: &Path, state: &IterationState) -> Result<()> {
    let (csv_path, json_path) = checkpoint_paths(dir);
    write_coefficients(&csv_path, &state.coeffs)?;
    atomic_write(&json_path, serde_json::to_string(&Checkpoint::from_state(state))?.as_bytes())
}

/// Loads a checkpoint from a directory or from either of its two files.
pub fn read_checkpoint(path: &Path, polygon: Arc<Polygon>) -> Result<IterationState> {
    let dir = if path.is_dir() { path.to_path_buf() } else { path.parent().unwrap_or(Path::new(".")).to_path_buf() };
    let (csv_path, json_path) = checkpoint_paths(&dir);
    let cp: Checkpoint = serde_json::from_str(&fs::read_to_string(&json_path)?)?;
    let from_csv = read_coefficients(&csv_path, polygon.clone())?;
    let log_path = dir.join("iterations.csv");
    let full = if log_path.exists() { Some(read_history(&log_path)?) } else { None };
    let state = cp.into_state(polygon, full)?;
    let agree = state
        .coeffs
        .values()
        .iter()
        .zip(from_csv.values())
        .all(|(a, b)| (a / b - 1.0).abs() < 1e-14);
    if !agree {
        return Err(Error::CoefficientMismatch("checkpoint CSV and sidecar disagree".into()));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_round_trip_is_exact() {
        let hex = Arc::new(Polygon::preset("hexagon").unwrap());
        let n = hex.lattice_points().len();
        let logs: Vec<f64> = (0..n).map(|i| (i as f64 * 1.37).cos() * 4.0).collect();
        let c = CoefficientSet::from_logs(hex.clone(), logs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_coefficients(&p, &c).unwrap();
        let back = read_coefficients(&p, hex).unwrap();
        assert_eq!(back.values(), c.values());
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("nu1,nu2,a\n0,0,"));
    }

    #[test]
    fn polygon_json() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.json");
        let oct = Polygon::preset("octagon").unwrap();
        write_polygon(&p, &oct).unwrap();
        let back = read_polygon(&p).unwrap();
        assert_eq!(back.vertices(), oct.vertices());
        fs::write(&p, r#"{"name":"bad","k":2,"vertices":[[0,0],[2,0],[0,1]]}"#).unwrap();
        assert!(matches!(read_polygon(&p), Err(Error::NotDelzant { .. })));
    }

    #[test]
    fn missing_coefficient_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "nu1,nu2,a\n0,0,1\n1,0,1\n").unwrap();
        let sq = Arc::new(Polygon::from_vertices(vec![[0, 0], [1, 0], [1, 1], [0, 1]], 1).unwrap());
        assert!(matches!(read_coefficients(&p, sq), Err(Error::CoefficientMismatch(_))));
    }

    #[test]
    fn headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let row = HistoryRow {
            outer: 1,
            inner_total: 5,
            l2_error: 0.1,
            max_ratio_dev: 1e-4,
            eta_max: 0.2,
        };
        write_history(&p, &[row]).unwrap();
        assert!(fs::read_to_string(&p).unwrap().starts_with(HISTORY_HEADER));
        assert_eq!(read_history(&p).unwrap(), vec![row]);
        let t = TrajectoryRow {
            time: 0.0,
            t1: 0.0,
            t2: 0.0,
            x1: 1.0,
            x2: 1.0,
            h: 0.5,
        };
        write_trajectory(&p, &[t]).unwrap();
        assert!(fs::read_to_string(&p).unwrap().starts_with(TRAJECTORY_HEADER));
        write_field(&p, &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().trim(), FIELD_HEADER);
    }
}
