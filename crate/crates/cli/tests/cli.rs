use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const GAMMA_NO_LEVERAGE: &str = r#"{
  "model": {
    "mu": 0.2,
    "beta": 0.0,
    "rho": 0.0,
    "lambda": 1.0,
    "v0": 1.0,
    "s0": 100.0,
    "horizon": 1.0,
    "bdlp": { "family": "gamma_ou", "shape": 1.0, "rate": 2.0 }
  },
  "numerics": { "n_paths": 2000, "n_steps": 50, "seed": 3, "memm_batch": 2000 }
}
"#;

fn bns(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bns-emm"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("BNS_WORKERS")
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> (String, Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap().to_string();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (comment, header, rows)
}

#[test]
fn check_on_reference_is_proven() {
    let dir = tempfile::tempdir().unwrap();
    let out = bns(dir.path(), &["check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("conditions.json")).unwrap()).unwrap();
    let reports = doc["reports"].as_array().unwrap();
    assert!(!reports.is_empty());
    assert!(reports.iter().all(|r| r["verdict"] == "proven"), "{doc}");
    assert!(doc["provenance"]["config_hash"].as_str().unwrap().len() == 64);
    assert!(String::from_utf8_lossy(&out.stdout).contains("SharpExistence"));
}

#[test]
fn solve_without_leverage_has_equal_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), GAMMA_NO_LEVERAGE);
    let out = bns(dir.path(), &["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (comment, header, rows) = csv_rows(&dir.path().join("theta.csv"));
    assert!(comment.starts_with("# bns-emm") && comment.contains("config_hash=") && comment.contains("seed=3"));
    assert_eq!(header, ["v", "theta_sharp", "theta_star", "residual_sharp", "residual_star"]);
    assert_eq!(rows.len(), 50);
    for r in rows {
        assert!((r[1] - r[2]).abs() <= 1e-12 * r[1].abs().max(1.0));
        assert!(r[3].abs() <= 1e-10 && r[4].abs() <= 1e-10);
    }
}

#[test]
fn simulate_writes_path_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = bns(dir.path(), &["simulate", "--set", "output.paths=3", "--set", "numerics.n_steps=20"]);
    assert_eq!(out.status.code(), Some(0));
    for i in 0..3 {
        let (comment, header, rows) = csv_rows(&dir.path().join(format!("path_{i:04}.csv")));
        assert!(comment.contains("seed=1"));
        assert_eq!(header, ["t", "V", "X", "S", "is_jump", "jump_size"]);
        assert!(rows.len() >= 21);
        assert_eq!(rows[0][3], 100.0);
    }
}

#[test]
fn verify_gate_and_negative_control() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), GAMMA_NO_LEVERAGE);
    let ok = bns(dir.path(), &["verify", "--config", &cfg, "--set", "measure.kind=memm_no_leverage"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let bad = bns(
        dir.path(),
        &[
            "verify",
            "--config",
            &cfg,
            "--set",
            "measure.kind=physical",
            "--set",
            "model.mu=0.1",
            "--set",
            "numerics.n_paths=20000",
        ],
    );
    assert_eq!(bad.status.code(), Some(4), "{}", String::from_utf8_lossy(&bad.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(doc["verify"]["pass"], false);
}

#[test]
fn price_and_compare_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bns(
        dir.path(),
        &[
            "price",
            "--set",
            "numerics.n_paths=2000",
            "--set",
            "numerics.n_steps=50",
            "--set",
            r#"pricing.measures=[{"kind":"exp_esscher"},{"kind":"minimal"}]"#,
            "--set",
            r#"pricing.payoffs=["call","put"]"#,
            "--set",
            "pricing.strikes=[90,110]",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("price.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + 8);
    assert!(text.lines().nth(1).unwrap().starts_with("measure,payoff,strike,price"));

    let out = bns(dir.path(), &["compare"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, header, rows) = csv_rows(&dir.path().join("compare.csv"));
    assert_eq!(&header[..4], ["v", "theta_sharp", "theta_star", "theta_flat"]);
    assert!(rows.iter().any(|r| r[4] > 1e-3));
}

#[test]
fn tabulated_tilt_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let tilt = dir.path().join("tilt.csv");
    fs::write(&tilt, "x,y\n0.5,0.8\n1.0,1.0\n2.0,1.2\n").unwrap();
    let spec = format!("csv:{}", tilt.display());
    let out = bns(dir.path(), &["check", "--tilt", &spec]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = bns(dir.path(), &["check", "--print-config", "--tilt", &spec]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("tabulated"));
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), GAMMA_NO_LEVERAGE);
    let out = bns(dir.path(), &["solve", "--config", &cfg, "--print-config"]);
    assert_eq!(out.status.code(), Some(0));
    let first = String::from_utf8(out.stdout).unwrap();
    let again = config(dir.path(), &first);
    let out = bns(dir.path(), &["solve", "--config", &again, "--print-config"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), first);
    assert!(!dir.path().join("theta.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bns(dir.path(), &["frobnicate"]).status.code(), Some(64));
    let missing = dir.path().join("missing.json");
    assert_eq!(bns(dir.path(), &["check", "--config", missing.to_str().unwrap()]).status.code(), Some(66));
    let out = bns(dir.path(), &["check", "--set", "model.rho=0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.rho"));
    let cfg = config(dir.path(), &GAMMA_NO_LEVERAGE.replace("\"rho\": 0.0", "\"rho\": 0.5"));
    let out = bns(dir.path(), &["check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config.json:5: model.rho"));
    // rho < 0 with the minimal entropy measure violates its precondition
    let out = bns(dir.path(), &["verify", "--set", "measure.kind=memm_no_leverage", "--set", "numerics.n_paths=10"]);
    assert_eq!(out.status.code(), Some(2));
}
