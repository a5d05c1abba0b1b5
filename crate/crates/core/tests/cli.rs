//! End-to-end runs of the `mforge` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

fn mforge(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mforge")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn write_config(dir: &Path, name: &str, mut v: Value) -> String {
    v["out_dir"] = json!(dir.join("out"));
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn tent(a: f64, peak: f64, b: f64) -> Value {
    json!({ "pieces": [{ "interval": [a, b], "knots": [[a, 0.0], [peak, 1.0], [b, 0.0]] }], "d": 1 })
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn cell(x: &str) -> f64 {
    match x {
        "inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => x.parse().unwrap(),
    }
}

#[test]
fn valid_tent_validates_with_fix_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", json!({ "f": tent(0.5, 1.0, 1.5) }));
    let (code, _, err) = mforge(&["validate", &cfg]);
    assert_eq!(code, 0, "{err}");
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/validate.json")).unwrap()).unwrap();
    assert_eq!(report["valid"], json!(true));
    assert_eq!(report["f_report"]["fix"][0]["lo"], json!(1.0));
}

#[test]
fn tau_not_vanishing_at_one_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let tau = json!({ "q": [-1.0, 0.0, 1.0, 2.0], "tau": [-2.0, -1.0, 0.1, 1.0], "dom": "R" });
    let cfg = write_config(dir.path(), "c.json", json!({ "tau": tau }));
    let (code, _, err) = mforge(&["validate", &cfg]);
    assert_eq!(code, 1);
    assert!(err.contains("τ(1)≠0"), "{err}");
}

#[test]
fn unordered_tau_pair_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let q = [-1.0, 0.0, 1.0, 2.0];
    let lin = |s: f64| json!({ "q": q, "tau": q.iter().map(|x| s * (x - 1.0)).collect::<Vec<_>>(), "dom": "R" });
    let cfg = write_config(dir.path(), "c.json", json!({ "tau": lin(0.9), "tau_upper": lin(0.7) }));
    let (code, _, err) = mforge(&["validate", &cfg]);
    assert_eq!(code, 1);
    assert!(err.contains("τ ≰ τ̄"), "{err}");
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(mforge(&["validate", missing.to_str().unwrap()]).0, 2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(mforge(&["validate", bad.to_str().unwrap()]).0, 2);
    let cfg = write_config(dir.path(), "c.json", json!({ "f": tent(0.5, 1.0, 1.5), "bogus": 1 }));
    assert_eq!(mforge(&["validate", &cfg]).0, 2);
    let cfg = write_config(dir.path(), "d.json", json!({ "f": tent(0.5, 1.0, 1.5) }));
    assert_eq!(mforge(&["tau", &cfg]).0, 2, "tau needs a prior build");
    assert_eq!(mforge(&["frobnicate", &cfg]).0, 2);
    assert_eq!(mforge(&["validate", &cfg, "--m_max"]).0, 2);
}

#[test]
fn single_atom_tau_rows_approach_linear_profile() {
    let dir = tempfile::tempdir().unwrap();
    let d = 0.6;
    let cfg = write_config(dir.path(), "c.json", json!({ "f": { "points": [[d, d]], "d": 1 }, "m_max": 2 }));
    assert_eq!(mforge(&["build", &cfg]).0, 0);
    assert_eq!(mforge(&["tau", &cfg]).0, 0);
    let rows = read_csv(&dir.path().join("out/tau.csv"));
    let mut worst = [0.0f64; 2];
    for r in rows.iter().filter(|r| r[0] == "s_m") {
        let m: usize = r[1].parse().unwrap();
        let (q, tau) = (cell(&r[4]), cell(&r[5]));
        let dev = (tau - d * (q - 1.0)).abs();
        let eps_m = 0.5 / ((m + 1) * (m + 1)) as f64;
        assert!(dev <= (q.abs() + 1.0) * eps_m, "m={m} q={q} dev={dev}");
        worst[m - 1] = worst[m - 1].max(dev);
    }
    assert!(worst[1] < worst[0]);
}

#[test]
fn predict_with_equal_spectra_gives_level_set_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", json!({ "f": tent(0.5, 1.0, 1.5), "predict_step": 0.25 }));
    assert_eq!(mforge(&["predict", &cfg]).0, 0);
    let rows = read_csv(&dir.path().join("out/predict.csv"));
    let grid = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75];
    assert_eq!(rows.len(), grid.len() * (grid.len() + 1) / 2);
    let f = |a: f64| if (0.5..=1.5).contains(&a) { 1.0 - 2.0 * (a - 1.0).abs() } else { f64::NEG_INFINITY };
    for r in &rows {
        let (a, b) = (cell(&r[0]), cell(&r[1]));
        let dims: Vec<f64> = r[2..].iter().map(|x| cell(x)).collect();
        if a == b {
            assert_eq!(dims[0], f(a), "dim_H E(mu, a, a) = f(a) at a = {a}");
            assert_eq!(dims[1], f(a));
        }
        if a > 1.5 || b < 0.5 {
            assert_eq!(dims[0], f64::NEG_INFINITY);
        }
        if dims[0].is_finite() && dims[1].is_finite() {
            assert!(dims[0] <= dims[1]);
        }
    }
}

#[test]
fn desk_small_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        json!({ "f": tent(0.8, 1.0, 1.2), "g": tent(0.5, 1.0, 1.5), "d_fix": 1.0, "m_max": 3, "seed": 3, "wavelet_n_max": 10 }),
    );
    let start = std::time::Instant::now();
    let (code, _, err) = mforge(&["report", &cfg]);
    assert_eq!(code, 0, "{err}");
    assert!(start.elapsed().as_secs() < 60);
    let out = dir.path().join("out");
    let first: Vec<(String, Vec<u8>)> = {
        let mut v: Vec<_> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        v.sort();
        v
    };
    for name in ["schedule.json", "measure.meta.json", "tau.csv", "ld.csv", "predict.csv", "wavelet.csv", "tau.svg", "manifest.json"] {
        assert!(first.iter().any(|(n, _)| n == name), "{name} missing");
    }
    assert_eq!(mforge(&["report", &cfg]).0, 0);
    for (name, bytes) in &first {
        assert_eq!(&fs::read(out.join(name)).unwrap(), bytes, "{name} changed between runs");
    }
    let manifest: Value = serde_json::from_slice(&first.iter().find(|f| f.0 == "manifest.json").unwrap().1).unwrap();
    assert!(manifest["deviations"].as_array().unwrap().len() > 3);
    assert_eq!(manifest["preset"]["name"], json!("desk-small"));
    for s in manifest["results"]["wavelet"]["series"].as_array().unwrap() {
        assert_eq!(s["bridge_within_bound"], json!(true));
    }
    let tau = fs::read_to_string(out.join("tau.csv")).unwrap();
    assert!(tau.starts_with("kind,m,s,n,q,tau,f_star,g_star\n"));
    assert!(!tau.contains('\r'));
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", json!({ "f": tent(0.5, 1.0, 1.5) }));
    let other = dir.path().join("other");
    let arg = format!("--out_dir={}", other.display());
    assert_eq!(mforge(&["build", &cfg, &arg, "--preset=tiny", "--m_max=2"]).0, 0);
    let s: Value = serde_json::from_str(&fs::read_to_string(other.join("schedule.json")).unwrap()).unwrap();
    assert_eq!(s["preset"]["name"], json!("tiny"));
    assert_eq!(s["m_max"], json!(2));
    assert_eq!(mforge(&["build", &cfg, "--preset=huge"]).0, 2);
}
