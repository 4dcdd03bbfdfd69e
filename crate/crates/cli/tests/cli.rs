use std::path::Path;
use std::process::{Command, Output};

use pmresp_core::function_space::{ChebGrid, SampledFunction};
use serde_json::Value;
use tempfile::TempDir;

fn pmresp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmresp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("PMRESP_LOG", "error")
        .output()
        .expect("run pmresp")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

/// Data rows of a CSV written by the tool, after the `#` block and header.
fn rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    let header = lines.next().unwrap().to_string();
    let data = lines
        .map(|l| l.split(',').map(|t| t.parse::<f64>().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, data)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn density_outputs_are_complete_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&pmresp(&["density", "--alpha", "0.5"], &a));
    ok(&pmresp(&["density", "--alpha", "0.5"], &b));
    for f in ["induced_density.csv", "unit_density.csv", "summary.json"] {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        // the echoed output directory is the only difference
        let strip = |v: Vec<u8>| String::from_utf8(v).unwrap().replace(a.to_str().unwrap(), "").replace(b.to_str().unwrap(), "");
        assert_eq!(strip(x), strip(y), "{f}");
    }
    let text = std::fs::read_to_string(a.join("induced_density.csv")).unwrap();
    assert!(text.starts_with("# pmresp "));
    assert!(text.contains("# config: {"));
    let (header, data) = rows(&a.join("induced_density.csv"));
    assert_eq!(header, "node,h,dh");
    assert_eq!(data.len(), 128);
    let (header, data) = rows(&a.join("unit_density.csv"));
    assert_eq!(header, "z,rho,da_rho");
    assert!(data.iter().all(|r| r[1] > 0.0 && r[2].is_finite()));
    let s = json(&a.join("summary.json"));
    assert!((s["integral_rho"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert!(s["normalizer"]["value"].as_f64().unwrap() >= 1.0);
    assert_eq!(s["meta"]["command"], "density");
    assert_eq!(s["meta"]["config"]["alpha"], 0.5);
}

#[test]
fn density_is_stable_under_refinement() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("n128"), dir.path().join("n256"));
    ok(&pmresp(&["density", "--alpha", "0.5", "--nodes", "128"], &a));
    ok(&pmresp(&["density", "--alpha", "0.5", "--nodes", "256"], &b));
    let (_, coarse) = rows(&a.join("induced_density.csv"));
    let (_, fine) = rows(&b.join("induced_density.csv"));
    let g = ChebGrid::new(256).unwrap();
    let h = SampledFunction::new(g, fine.iter().map(|r| r[1]).collect()).unwrap();
    let gap = coarse.iter().map(|r| (h.eval(r[0]) - r[1]).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-8, "{gap}");
}

#[test]
fn response_of_a_constant_is_flat() {
    let dir = TempDir::new().unwrap();
    ok(&pmresp(&["response", "--alpha", "0.6", "--obs", "one"], dir.path()));
    let (header, data) = rows(&dir.path().join("response.csv"));
    assert_eq!(header, "alpha,expectation,derivative,residual,tail");
    assert_eq!(data.len(), 1);
    assert!((data[0][1] - 1.0).abs() < 1e-12);
    assert!(data[0][2].abs() <= 1e-8);
    let j = json(&dir.path().join("response.json"));
    assert_eq!(j["result"]["route"], "kac_quotient");
    assert!(j["route_gap"].as_f64().unwrap() <= 1e-5);
}

#[test]
fn singular_response_uses_the_density_route() {
    let dir = TempDir::new().unwrap();
    ok(&pmresp(&["response", "--alpha", "0.5", "--obs", "pow:-0.1"], dir.path()));
    let j = json(&dir.path().join("response.json"));
    assert_eq!(j["result"]["route"], "density_integral");
    assert!(j["route_gap"].is_null());
}

#[test]
fn sweep_passes_its_self_check() {
    let dir = TempDir::new().unwrap();
    ok(&pmresp(&["sweep", "--alpha-grid", "0.3:0.5:0.05", "--obs", "cos:1", "--jobs", "2"], dir.path()));
    let (_, data) = rows(&dir.path().join("sweep.csv"));
    assert_eq!(data.len(), 5);
    let s = json(&dir.path().join("sweep.json"));
    // the central secant misses h^2 E'''/6; estimate E''' from the derivative column
    let h: f64 = 0.05;
    let curv = data
        .windows(3)
        .map(|w| ((w[2][2] - 2.0 * w[1][2] + w[0][2]) / (h * h)).abs())
        .fold(0.0, f64::max);
    let inconsistency = s["secant_inconsistency"].as_f64().unwrap();
    assert!(inconsistency <= h * h * curv / 3.0, "{inconsistency} vs {curv}");
    assert!(s["max_route_gap"].as_f64().unwrap() <= 1e-5);
    assert_eq!(s["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn verify_writes_the_audit_report() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"audit_alphas": [0.3, 0.7], "audit_z_points": 24, "audit_r_max": 4000}"#).unwrap();
    let o = pmresp(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    ok(&o);
    let j = json(&dir.path().join("audit.json"));
    assert_eq!(j["pass"], true);
    let rec = &j["records"][0];
    for key in ["check", "params", "witness", "margin", "pass"] {
        assert!(rec.get(key).is_some(), "{key}");
    }
    assert_eq!(j["meta"]["config"]["audit_r_max"], 4000);
}

#[test]
fn mc_reports_against_the_pipeline() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"mc_steps": 200000, "mc_mode": "induced"}"#).unwrap();
    ok(&pmresp(&["mc", "--alpha", "0.3", "--seed", "5", "--config", cfg.to_str().unwrap()], dir.path()));
    let j = json(&dir.path().join("mc.json"));
    assert_eq!(j["mode"], "induced");
    assert_eq!(j["report"]["generator"], "ChaCha20");
    assert_eq!(j["report"]["seed"], 5);
    assert!(j["z_score"].as_f64().unwrap() < 5.0);
    assert_eq!(j["report"]["bins"]["freq"].as_array().unwrap().len(), 50);
}

#[test]
fn flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"alpha": 0.9, "obs": "x", "nodes": 64}"#).unwrap();
    ok(&pmresp(&["response", "--config", cfg.to_str().unwrap(), "--alpha", "0.4"], dir.path()));
    let j = json(&dir.path().join("response.json"));
    assert_eq!(j["meta"]["config"]["alpha"], 0.4);
    assert_eq!(j["meta"]["config"]["nodes"], 64);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let code = |args: &[&str]| pmresp(args, dir.path()).status.code();
    assert_eq!(code(&["density"]), Some(1));
    assert_eq!(code(&["density", "--alpha", "1.5"]), Some(1));
    assert_eq!(code(&["response", "--alpha", "0.5", "--obs", "nope"]), Some(1));
    assert_eq!(code(&["sweep", "--alpha-grid", "0.2:0.45:0.1"]), Some(1));
    assert_eq!(code(&["frobnicate"]), Some(1));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"alhpa": 0.5}"#).unwrap();
    assert_eq!(code(&["density", "--config", bad.to_str().unwrap()]), Some(1));
    // the fixed-point tolerance cannot be met in floating point
    assert_eq!(code(&["density", "--alpha", "0.5", "--tol", "1e-20"]), Some(2));
    assert_eq!(code(&["--version"]), Some(0));
}
