use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn blockspin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockspin"))
        .args(args)
        .env_remove("BLOCKSPIN_THREADS")
        .output()
        .expect("binary runs")
}

fn analyze_json(beta: &str, alpha: &str) -> Value {
    let out = blockspin(&["analyze", "--beta", beta, "--alpha", alpha, "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analyze_reports_the_three_regimes() {
    let high = analyze_json("0.5", "0.2");
    assert_eq!(high["analysis"]["regime"], "high");
    assert_eq!(high["analysis"]["m_star"], 0.0);
    assert!((high["analysis"]["kappa1"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    let low = analyze_json("0.8", "0.25");
    assert_eq!(low["analysis"]["regime"], "low");
    let m = low["analysis"]["m_star"].as_f64().unwrap();
    assert!((m - 0.752).abs() < 1e-3);
    assert_eq!(low["analysis"]["minimizers_verified"], true);

    let critical = analyze_json("0.6", "0.2");
    assert_eq!(critical["analysis"]["regime"], "critical");
    let text = blockspin(&["analyze", "--beta", "0.6", "--alpha", "0.2"]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("warning: critical point"));
}

#[test]
fn analyze_echoes_config_and_version() {
    let v = analyze_json("0.5", "0.2");
    assert_eq!(v["config"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config"]["model"]["beta"], 0.5);
    assert_eq!(v["config"]["command"], "analyze");
}

#[test]
fn invalid_cone_is_an_error() {
    let out = blockspin(&["analyze", "--beta", "0.3", "--alpha", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta > 2 alpha > 0"));
}

fn simulate(dir: &Path, extra: &[&str]) {
    let d = dir.to_str().unwrap();
    let mut args = vec!["simulate", "--n-spins", "2400", "--n-blocks", "4", "--samples", "150", "--out", d];
    args.extend_from_slice(extra);
    let out = blockspin(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        simulate(dir, &["--seed", "9", "--replicas", "2"]);
    }
    for name in ["samples_0.csv", "samples_1.csv", "heatmap.svg"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_ne!(
        fs::read(a.join("samples_0.csv")).unwrap(),
        fs::read(a.join("samples_1.csv")).unwrap()
    );
    let csv = fs::read_to_string(a.join("samples_0.csv")).unwrap();
    assert!(csv.starts_with("sweep,m_1,m_2,m_3,m_4\n"));
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 151);
}

fn fill_colours(svg: &str) -> Vec<(u8, u8, u8)> {
    svg.lines()
        .filter(|l| l.starts_with("<rect x") && !l.contains(r#"width="16""#))
        .filter_map(|l| l.split("fill=\"#").nth(1))
        .map(|h| {
            let p = |i: usize| u8::from_str_radix(&h[i..i + 2], 16).unwrap();
            (p(0), p(2), p(4))
        })
        .collect()
}

#[test]
fn heatmaps_distinguish_the_phases() {
    let tmp = tempfile::tempdir().unwrap();
    let hot = tmp.path().join("hot");
    let cold = tmp.path().join("cold");
    simulate(&hot, &["--beta", "0.4", "--alpha", "0.1"]);
    simulate(&cold, &["--beta", "0.8", "--alpha", "0.25"]);

    let washed = fill_colours(&fs::read_to_string(hot.join("heatmap.svg")).unwrap());
    assert_eq!(washed.len(), 4 * 150);
    // near-white: every channel stays light
    let light = washed.iter().filter(|c| c.0.min(c.1).min(c.2) > 150).count();
    assert!(light as f64 > 0.95 * washed.len() as f64, "{light}");

    let saturated = fill_colours(&fs::read_to_string(cold.join("heatmap.svg")).unwrap());
    assert!(saturated.iter().all(|c| c.0 > 150 && c.2 < 120), "one phase, strongly red");
}

#[test]
fn simulate_binary_and_json_formats() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), &["--format", "bin"]);
    let bytes = fs::read(tmp.path().join("samples_0.bin")).unwrap();
    assert_eq!(bytes.len(), 150 * 4 * 8);
    let first = f64::from_le_bytes(bytes[..8].try_into().unwrap());
    assert!((-1.0..=1.0).contains(&first));

    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), &["--format", "json"]);
    let v: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("samples_0.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 150);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["diagnostics"]["r_hat"].is_array());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.toml");
    fs::write(
        &path,
        "[model]\nbeta = 0.8\nalpha = 0.25\nn_spins = 600\nn_blocks = 3\n\n[sampler]\nseed = 4\nn_samples = 20\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = blockspin(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--beta",
        "1.0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let cfg = &summary["config"];
    assert_eq!(cfg["model"]["beta"], 1.0);
    assert_eq!(cfg["model"]["alpha"], 0.25);
    assert_eq!(cfg["model"]["n_blocks"], 3);
    assert_eq!(cfg["sampler"]["seed"], 4);
    assert_eq!(cfg["sampler"]["n_samples"], 20);
    assert!(summary["diagnostics"].is_null());

    let json_path = tmp.path().join("run.json");
    fs::write(&json_path, r#"{"model": {"beta": 0.6, "alpha": 0.1}}"#).unwrap();
    let out = blockspin(&["analyze", "--config", json_path.to_str().unwrap(), "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["model"]["beta"], 0.6);
    assert_eq!(v["analysis"]["regime"], "high");

    fs::write(&path, "[model]\nbeat = 0.8\n").unwrap();
    let out = blockspin(&["analyze", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("file");
    fs::write(&file, "").unwrap();
    let inside = file.join("out");
    let out = blockspin(&["simulate", "--samples", "10", "--out", inside.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("creating output directory"));
}

#[test]
fn exact_enumeration_and_transfer_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("law");
    let out = blockspin(&[
        "exact", "--beta", "0.8", "--alpha", "0.25", "--n-spins", "12", "--n-blocks", "3", "--out",
        d.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(d.join("law.csv")).unwrap();
    assert!(csv.starts_with("m_1,m_2,m_3,log_prob\n"));
    assert_eq!(csv.lines().count(), 1 + 5 * 5 * 5);
    let total: f64 = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap().exp())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);

    let t = tmp.path().join("tm");
    let out = blockspin(&["exact", "--transfer", "--n-spins", "64", "--n-blocks", "16", "--out", t.to_str().unwrap()]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(t.join("exact.json")).unwrap()).unwrap();
    assert_eq!(v["method"], "transfer");
    assert!(v["stats"]["mean"].as_f64().unwrap().abs() < 1e-14);
    assert!(fs::read_to_string(t.join("two_point.csv")).unwrap().starts_with("distance,"));
}

#[test]
fn verify_writes_reports_and_sets_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("reports");
    let out = blockspin(&["verify", "chain", "--out", d.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("criterion 7"), "{stdout}");
    assert_eq!(out.status.success(), stdout.contains(": PASS"));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(d.join("criterion_7.json")).unwrap()).unwrap();
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["run_config"]["command"], "verify");
    assert!(report["verdicts"].as_array().unwrap().len() >= 4);

    let out = blockspin(&["verify", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn sweep_writes_grid_and_heatmap() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("sweep");
    let out = blockspin(&[
        "sweep", "--betas", "0.3,0.5,0.7,0.9,1.1", "--alphas", "0.1,0.2", "--n-spins", "1200",
        "--threads", "1", "--out", d.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(d.join("sweep.csv")).unwrap();
    // beta = 0.3 lies outside the cone for alpha = 0.2
    assert_eq!(csv.lines().count(), 1 + 9);
    let svg = fs::read_to_string(d.join("sweep.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 1 + 10 + 40);
}
