use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn toric(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toric")).args(args).output().expect("spawn toric")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn out_arg(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_hexagon_defaults() {
    let o = toric(&["validate"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("[PASS]").count(), 5);
}

#[test]
fn validate_coarse_grid_fails() {
    let o = toric(&["validate", "--h", "6"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("[FAIL] area"));
}

#[test]
fn validate_triangle_chern_weil() {
    let o = toric(&["validate", "--polygon", "triangle"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let line = stdout(&o).lines().find(|l| l.contains("chern-weil")).unwrap().to_string();
    assert!(line.contains("p - 6 = -3"), "{line}");
    let r: f64 = line.split("residual ").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!(r.abs() < 1e-3);
}

#[test]
fn config_errors_exit_3() {
    for args in [
        &["validate", "--bogus"][..],
        &["validate", "--c", "-1"],
        &["validate", "--polygon", "nonagon"],
        &["validate", "--k-scale", "1/4"],
        &["validate", "--truncation", "2"],
        &["report", "--coeffs", "/nonexistent/a.csv"],
    ] {
        assert_eq!(code(&toric(args)), 3, "{args:?}");
    }
}

#[test]
fn custom_polygon_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.json");
    fs::write(&p, r#"{"name":"trapezoid","k":2,"vertices":[[0,0],[2,0],[1,1],[0,1]]}"#).unwrap();
    let o = toric(&["validate", "--polygon", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    fs::write(&p, r#"{"name":"bad","k":2,"vertices":[[0,0],[2,0],[0,1]]}"#).unwrap();
    assert_eq!(code(&toric(&["validate", "--polygon", p.to_str().unwrap()])), 3);
}

fn refine_args<'a>(out: &'a str, cap: &'a str) -> Vec<&'a str> {
    vec!["refine", "--polygon", "pentagon", "--k", "4", "--out", out, "--outer-cap", cap]
}

#[test]
fn resume_reproduces_history_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let full = out_arg(&dir.path().join("full"));
    let part = out_arg(&dir.path().join("part"));
    assert_eq!(code(&toric(&refine_args(&full, "20"))), 0);
    assert_eq!(code(&toric(&refine_args(&part, "8"))), 0);
    let hist = fs::read_to_string(Path::new(&part).join("iterations.csv")).unwrap();
    assert_eq!(hist.lines().count(), 9);
    let mut args = refine_args(&part, "20");
    args.extend(["--resume", &part]);
    let o = toric(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["iterations.csv", "coefficients.csv", "checkpoint.json", "checkpoint.csv", "summary.json"] {
        let a = fs::read(Path::new(&full).join(f)).unwrap();
        let b = fs::read(Path::new(&part).join(f)).unwrap();
        assert!(a == b, "{f} differs after resume");
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for n in ["1", "3"] {
        let out = out_arg(&dir.path().join(n));
        let mut args = refine_args(&out, "5");
        args.extend(["--threads", n]);
        assert_eq!(code(&toric(&args)), 0);
        outs.push((
            fs::read(Path::new(&out).join("coefficients.csv")).unwrap(),
            fs::read(Path::new(&out).join("iterations.csv")).unwrap(),
        ));
    }
    assert!(outs[0] == outs[1]);
}

#[test]
fn divergence_exits_4_and_keeps_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir.path().join("d"));
    let mut args = refine_args(&out, "200");
    args.extend(["--c", "5"]);
    assert_eq!(code(&toric(&args)), 4);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(Path::new(&out).join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["stop_reason"], "Diverged");
    assert!(Path::new(&out).join("checkpoint.json").exists());
    assert!(fs::read_to_string(Path::new(&out).join("iterations.csv")).unwrap().lines().count() > 1);
}

#[test]
fn summary_and_field_of_refined_hexagon() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let o = toric(&["refine", "--polygon", "hexagon", "--symmetry", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    for key in [
        "coeff_max", "coeff_min", "l2", "err_max", "err_min", "norm_err_max", "norm_err_min", "riem_max", "riem_min",
        "gauss_max", "gauss_min", "w_max", "rho_max",
    ] {
        assert!(s[key].is_f64(), "{key}");
    }
    let l2 = s["l2"].as_f64().unwrap();
    assert!((l2 / 0.0077 - 1.0).abs() < 0.2, "{l2}");
    let o = toric(&["report", "--polygon", "hexagon", "--out", &out, "--spacing", "0.3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("field.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,S,Shat,K,rho_norm,w_norm,riem_norm,bach_norm");
    let mut k_near_centre = f64::INFINITY;
    let mut k_max = f64::NEG_INFINITY;
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        k_max = k_max.max(v[4]);
        let d = (v[0] - 3.0).hypot(v[1] - 3.0);
        if d < 0.5 {
            k_near_centre = k_near_centre.min(v[4].abs());
        }
    }
    // the Gauss curvature of the real slice is non-positive and vanishes at the centre
    assert!(k_max <= 1e-3, "{k_max}");
    assert!(k_near_centre < 1e-2, "{k_near_centre}");
}

#[test]
fn convergence_sweep_continues_past_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let o = toric(&["convergence", "--polygon", "hexagon", "--symmetry", "--ks", "4,5,6", "--out", &out]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    let text = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("5,NaN"));
    let l2 = |r: &str| -> f64 { r.split(',').nth(1).unwrap().parse().unwrap() };
    assert!(l2(rows[2]) < l2(rows[0]));
    assert!((l2(rows[0]) / 0.019 - 1.0).abs() < 0.5);
}

#[test]
fn geodesic_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let o = toric(&["geodesic", "--polygon", "triangle", "--k", "2", "--x0", "0.6,0.7", "--p0", "-0.3,0.2", "--j", "0.1,0.2", "--steps", "500", "--every", "50", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 11);
    assert!((rows[0][3] - 0.6).abs() < 1e-10 && (rows[0][4] - 0.7).abs() < 1e-10);
    let h0 = rows[0][5];
    assert!(rows.iter().all(|r| (r[5] / h0 - 1.0).abs() < 1e-8));
}
