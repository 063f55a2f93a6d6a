use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_supdeconv"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn supdeconv")
}

fn write_data(dir: &Path, n: usize) -> String {
    // deterministic pseudo-observations spread over [-3, 3]
    let mut text = String::from("# synthetic\n");
    for i in 0..n {
        let u = ((i as f64 + 0.5) * 0.618_033_988_75).fract();
        text.push_str(&format!("{}\n", 6.0 * u - 3.0));
    }
    let path = dir.join("data.csv");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn config(dir: &Path, h: f64, replicates: usize) -> String {
    let cfg = format!(
        r#"{{
  "schema_version": 1,
  "models": {{
    "error": {{"name": "gaussian"}},
    "kernel": {{"name": "sinc_flat"}},
    "signal": {{"name": "gaussian", "params": {{"mean": 0.0, "sd": 1.0}}}}
  }},
  "ladder": [{{"n": 200, "h": {h}}}, {{"n": 400, "h": 0.45}}],
  "replicates": {replicates},
  "base_seed": 5,
  "grid_points": 64
}}"#
    );
    let path = dir.join("config.json");
    fs::write(&path, cfg).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn validate_gaussian_sinc_passes() {
    let out = run(&["validate", "--error", "gaussian", "--kernel", "sinc-flat"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["all_passed"], true);
    assert!(report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["passed"] == true));
}

#[test]
fn validate_mix_polynomial_passes() {
    let out = run(&[
        "validate",
        "--error",
        "gaussian-laplace-mix",
        "--kernel",
        "polynomial",
        "--m",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn estimate_empty_csv_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    fs::write(&path, "").unwrap();
    let out = run(&["estimate", "--input", path.to_str().unwrap(), "--h", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn estimate_writes_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), 100);
    let out = run(&[
        "estimate",
        "--input",
        &data,
        "--h",
        "0.5",
        "--grid-points",
        "11",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,value,kind");
    assert_eq!(lines.len(), 12);
    assert!(lines[1].starts_with("0,"));
    assert!(lines[1].ends_with(",estimate"));
}

#[test]
fn band_writes_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), 100);
    let out = run(&[
        "band",
        "--input",
        &data,
        "--h",
        "0.5",
        "--grid-points",
        "11",
        "--level",
        "0.9",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("x,center,lower,upper"));
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert!(v[2] < v[1] && v[1] < v[3]);
    }
    let bad = run(&["band", "--input", &data, "--h", "0.5", "--level", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn supstat_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), 100);
    let out = run(&[
        "supstat",
        "--input",
        &data,
        "--h",
        "0.5",
        "--grid-points",
        "64",
        "--signal",
        r#"{"name":"gaussian","params":{"mean":0.0,"sd":1.0}}"#,
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let m_n = v["m_n"].as_f64().unwrap();
    let scaled = v["scaled"].as_f64().unwrap();
    let a_n = v["a_n"].as_f64().unwrap();
    let c = v["c_limit"].as_f64().unwrap();
    assert!(m_n > 0.0);
    assert!((scaled - a_n * m_n / c).abs() <= 1e-12 * scaled.abs().max(1.0));
}

#[test]
fn supstat_coarse_grid_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), 50);
    let out = run(&[
        "supstat",
        "--input",
        &data,
        "--h",
        "0.5",
        "--grid-points",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mc_sup_overflow_guard_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 0.01, 2);
    let out = run(&["mc-sup", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("5000"));
}

#[test]
fn mc_sup_and_bands_share_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 0.5, 8);
    let outdir = dir.path().join("out");
    let od = outdir.to_str().unwrap();
    let a = run(&[
        "mc-sup",
        "--config",
        &cfg,
        "--output-dir",
        od,
        "--threads",
        "2",
    ]);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(report["rungs"].as_array().unwrap().len(), 2);
    assert!(outdir.join("sup_report.json").exists());
    assert!(outdir.join("sup_rung1_replicates.csv").exists());
    let manifest = fs::read_to_string(outdir.join("sup_rung0_manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 9);

    let b = run(&[
        "mc-bands",
        "--config",
        &cfg,
        "--output-dir",
        od,
        "--level",
        "0.95",
    ]);
    assert_eq!(b.status.code(), Some(0));
    let cov: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_eq!(
        cov["rungs"][1]["coverage"].as_f64().unwrap(),
        report["rungs"][1]["band_coverage"].as_f64().unwrap()
    );
    // manifests were reused, not extended
    let again = fs::read_to_string(outdir.join("sup_rung0_manifest.csv")).unwrap();
    assert_eq!(again, manifest);

    let u = run(&[
        "mc-bands",
        "--config",
        &cfg,
        "--output-dir",
        od,
        "--unbounded",
    ]);
    let cov: serde_json::Value = serde_json::from_slice(&u.stdout).unwrap();
    assert!(cov["rungs"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["coverage"] == 1.0));
}

#[test]
fn mc_sup_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 0.5, 4);
    let a = run(&["mc-sup", "--config", &cfg, "--threads", "1"]);
    let b = run(&["mc-sup", "--config", &cfg, "--threads", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn diag_decomp_data_mode() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), 150);
    let out = run(&[
        "diag-decomp",
        "--input",
        &data,
        "--h",
        "0.3",
        "--grid-points",
        "32",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("x,main,r1,r2,r3,fnh,residual"));
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert!(v[6].abs() <= 1e-6, "{line}");
        assert_eq!(v[4], 0.0);
    }
}

#[test]
fn diag_decomp_config_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 0.5, 2);
    let out = run(&["diag-decomp", "--config", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["experiment"], "remainder_diagnostics");
    assert_eq!(
        v["rungs"][0]["remainder_ratios"].as_array().unwrap().len(),
        3
    );
}

#[test]
fn diag_decomp_needs_input() {
    assert_eq!(run(&["diag-decomp", "--h", "0.3"]).status.code(), Some(2));
}

#[test]
fn limit_law_tables() {
    let out = run(&["limit-law", "rayleigh-table", "--points", "5", "--max", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,pdf,cdf");
    assert_eq!(lines[1], "0,0,0");
    assert_eq!(lines.len(), 6);

    let w = run(&["limit-law", "w-path", "--grid", "16", "--seed", "3"]);
    assert_eq!(w.status.code(), Some(0));
    assert_eq!(String::from_utf8(w.stdout).unwrap().lines().count(), 17);

    let e = run(&[
        "limit-law",
        "exact-sup",
        "--draws",
        "20000",
        "--threshold",
        "0.02",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&e.stdout).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn usage_error_is_nonzero() {
    let out = run(&["estimate"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(!out.stderr.is_empty());
    assert_ne!(run(&["no-such-command"]).status.code(), Some(0));
}
