use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn symsq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symsq"))
        .args(args)
        .env("SYMSQ_CACHE_DIR", "/nonexistent/symsq-cache")
        .output()
        .expect("binary runs")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn help_lists_subcommands() {
    let out = symsq(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["verify-voronoi", "verify-petersson", "verify-fe", "scan-mean-value", "validate-data", "kernels-table"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn unsupported_level_is_a_usage_error() {
    let out = symsq(&["verify-voronoi", "--q", "7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no built-in form"));
}

#[test]
fn verify_fe_writes_reports_and_timing() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("fe.json");
    let out = symsq(&["verify-fe", "--q", "5", "--output", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&out_path);
    assert_eq!(v["passed"], Value::Bool(true));
    assert_eq!(v["config"]["levels"], serde_json::json!([5]));
    assert_eq!(v["config"]["n_powers"], serde_json::json!([2]));
    let reports = v["reports"].as_array().unwrap();
    // Three primitive characters mod 5, plus four units for the decomposition.
    assert_eq!(reports.len(), 7);
    for r in reports {
        assert!(!r["anchor"].as_str().unwrap().is_empty());
        assert!(r.get("wall_time").is_none());
    }
    let timing = read_json(&dir.path().join("fe.json.timing.json"));
    assert_eq!(timing["reports"].as_array().unwrap().len(), 7);
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("v.json");
    let args = ["verify-voronoi", "--q", "3", "--output", out_path.to_str().unwrap()];
    assert!(symsq(&args).status.success());
    let first = std::fs::read(&out_path).unwrap();
    assert!(symsq(&args).status.success());
    assert_eq!(first, std::fs::read(&out_path).unwrap());
}

#[test]
fn tight_tolerance_at_weight_two_fails_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("t.json");
    let out = symsq(&["verify-voronoi", "--q", "11", "--n-powers", "2", "--tolerance", "1e-12", "--output", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = read_json(&out_path);
    assert_eq!(v["passed"], Value::Bool(false));
    let failing: Vec<_> = v["reports"].as_array().unwrap().iter().filter(|r| r["passed"] == Value::Bool(false)).collect();
    assert!(!failing.is_empty());
    for r in failing {
        assert!(r["first_failure"].as_str().unwrap().contains("tolerance"));
    }
}

#[test]
fn kernels_table_matches_baseline() {
    let out = symsq(&["kernels-table"]);
    assert!(out.status.success());
    let mut fresh = csv::Reader::from_reader(out.stdout.as_slice());
    let baseline_path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/kernels_table.csv");
    let mut baseline = csv::Reader::from_path(baseline_path).unwrap();
    let fresh: Vec<Vec<String>> =
        fresh.records().map(|r| r.unwrap().iter().take(4).map(String::from).collect()).collect();
    let base: Vec<Vec<String>> = baseline.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    assert_eq!(fresh, base);
}

#[test]
fn config_file_is_read_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "q = 3\nformat = csv\ntolerance = 1e-3\n").unwrap();
    let out_path = dir.path().join("out.csv");
    let out = symsq(&["verify-fe", "--config", cfg.to_str().unwrap(), "--tolerance", "1e-7", "--output", out_path.to_str().unwrap()]);
    assert!(out.status.success());
    let mut rd = csv::Reader::from_path(&out_path).unwrap();
    let headers = rd.headers().unwrap().clone();
    let cfg_col = headers.iter().position(|h| h == "config").unwrap();
    let q_col = headers.iter().position(|h| h == "q").unwrap();
    for rec in rd.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[q_col], "3");
        let config: Value = serde_json::from_str(&rec[cfg_col]).unwrap();
        assert_eq!(config["tolerance"], serde_json::json!(1e-7));
    }
}

#[test]
fn validate_data_accepts_shipped_files_and_rejects_corruption() {
    let file = concat!(env!("CARGO_MANIFEST_DIR"), "/data/basis_11_4.jsonl");
    assert!(symsq(&["validate-data", "--data", file]).status.success());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    let text = std::fs::read_to_string(file).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut rec: Value = serde_json::from_str(&lines[0]).unwrap();
    // Perturb a(6) so that a(6) != a(2) a(3).
    let a6 = rec["an"][5].as_str().unwrap().parse::<f64>().unwrap();
    rec["an"][5] = Value::String(format!("{:.6}", a6 + 0.5));
    lines[0] = serde_json::to_string(&rec).unwrap();
    std::fs::write(&bad, lines.join("\n")).unwrap();
    let out = symsq(&["validate-data", "--data", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
