use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn bellkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["--json", "-"];
    full.extend_from_slice(args);
    let out = bellkit(&full);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bounds_of_mermin() {
    let v = json(&["bounds", "--expr", "mermin3"]);
    assert_eq!(f(&v["lhv_bound"]), 2.0);
    assert_eq!(f(&v["algebraic_bound"]), 4.0);
    assert_eq!(v["witness"]["outcomes"].as_array().unwrap().len(), 3);
}

#[test]
fn bounds_default_expression_is_mermin() {
    assert_eq!(f(&json(&["bounds"])["lhv_bound"]), 2.0);
}

#[test]
fn bounds_rejects_all_zero_expression() {
    let out = bellkit(&["bounds", "--expr", path(&data("zero.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no nonzero coefficient"));
}

#[test]
fn bounds_of_embedded_two_party_expression() {
    let v = json(&["bounds", "--expr", path(&data("chsh-embedded.json"))]);
    assert_eq!(f(&v["lhv_bound"]), 2.0);
    assert_eq!(f(&v["algebraic_bound"]), 4.0);
}

#[test]
fn dot_slash_forces_file_lookup() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bellkit"))
        .current_dir(dir.path())
        .args(["bounds", "--expr", "./mermin3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn quantum_values() {
    for (v, b) in [("0.71", 2.84), ("1.0", 4.0), ("0.0", 0.0)] {
        let r = json(&["quantum", "--v", v]);
        assert!(
            (f(&r["bell_value"]) - b).abs() <= 1e-12,
            "V={v}: {}",
            r["bell_value"]
        );
        assert_eq!(r["correlations"].as_array().unwrap().len(), 8);
    }
    let noise = json(&["quantum", "--v", "0"]);
    for row in noise["correlations"].as_array().unwrap() {
        assert!(f(&row["E"]).abs() <= 1e-12);
    }
}

#[test]
fn quantum_rejects_out_of_range_visibility() {
    assert_eq!(bellkit(&["quantum", "--v", "1.5"]).status.code(), Some(3));
    assert_eq!(bellkit(&["quantum"]).status.code(), Some(2));
}

#[test]
fn quantum_settings_search() {
    let r = json(&[
        "quantum",
        "--v",
        "1",
        "--optimize",
        "--restarts",
        "4",
        "--seed",
        "3",
    ]);
    assert!(f(&r["optimized"]["bell_value"]) >= 4.0 - 1e-6);
}

#[test]
fn simulate_quantum_estimate_near_headline() {
    let r = json(&[
        "simulate",
        "--quantum-v",
        "0.71",
        "--shots",
        "100000",
        "--seed",
        "7",
    ]);
    let (b, se) = (f(&r["bell"]["value"]), f(&r["bell"]["stderr"]));
    assert!(se > 0.0);
    assert!((b - 2.84).abs() <= 3.0 * se, "{b} ± {se}");
}

#[test]
fn simulate_uniform_lhv_estimate_near_zero() {
    let r = json(&[
        "simulate", "--lhv", "uniform", "--shots", "1000", "--seed", "0",
    ]);
    let (b, se) = (f(&r["bell"]["value"]), f(&r["bell"]["stderr"]));
    assert!(b.abs() <= 5.0 * se, "{b} ± {se}");
}

#[test]
fn simulate_is_byte_identical_for_equal_flags() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = bellkit(&[
            "simulate",
            "--quantum-v",
            "0.71",
            "--shots",
            "5000",
            "--seed",
            "11",
            "--out",
            path(p),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let c = dir.path().join("c.json");
    bellkit(&[
        "simulate",
        "--quantum-v",
        "0.71",
        "--shots",
        "5000",
        "--seed",
        "12",
        "--out",
        path(&c),
    ]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("e.csv");
    let out = bellkit(&[
        "simulate",
        "--quantum-v",
        "1",
        "--shots",
        "100",
        "--csv",
        path(&csv),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("i,j,k,E,stderr"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn simulate_needs_one_source() {
    assert_eq!(
        bellkit(&["simulate", "--shots", "10"]).status.code(),
        Some(2)
    );
    assert_eq!(
        bellkit(&[
            "simulate",
            "--quantum-v",
            "0.5",
            "--lhv",
            "uniform",
            "--shots",
            "10"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        bellkit(&["simulate", "--quantum-v", "0.5", "--shots", "0"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn simulate_rejects_unwritable_output() {
    let out = bellkit(&[
        "simulate",
        "--quantum-v",
        "0.5",
        "--shots",
        "10",
        "--out",
        "/nonexistent/dir/x.json",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn simulate_rejects_invalid_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    fs::write(&model, r#"{"settings":[2,2,2],"weights":[1.0]}"#).unwrap();
    let out = bellkit(&["simulate", "--lhv", path(&model), "--shots", "10"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn compare_simulated_quantum_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("q.json");
    bellkit(&[
        "simulate",
        "--quantum-v",
        "0.71",
        "--shots",
        "100000",
        "--seed",
        "1",
        "--out",
        path(&d),
    ]);
    let r = json(&["compare", path(&d)]);
    assert_eq!(r["verdict"], "quantum_closer");
    assert_eq!(r["per_tuple"].as_array().unwrap().len(), 8);
    assert!(f(&r["quantum_fit"]["residual"]) < f(&r["lhv_fit"]["residual"]));

    let twin: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("q.json.report.json")).unwrap())
            .unwrap();
    assert_eq!(twin["verdict"], "quantum_closer");
}

#[test]
fn compare_point_mass_data_prefers_local_model() {
    // Strategy 0 answers +1 everywhere, so every correlation is +1. The
    // noisy-GHZ family predicts +V, −V or 0 on the Mermin tuples, whose
    // signs cancel: the best V is 0 and the residual is 8.
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("v.json");
    let report = dir.path().join("r.json");
    bellkit(&[
        "simulate",
        "--lhv",
        "vertex:0",
        "--shots",
        "500",
        "--out",
        path(&d),
    ]);
    let r = json(&["compare", path(&d), "--report", path(&report)]);
    assert_eq!(r["verdict"], "lhv_closer");
    assert!((f(&r["quantum_fit"]["residual"]) - 8.0).abs() <= 1e-12);
    assert!(f(&r["lhv_fit"]["residual"]) <= 1e-12);
    assert!(report.exists());
}

#[test]
fn compare_accepts_correlation_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("e.csv");
    bellkit(&[
        "simulate",
        "--quantum-v",
        "0.71",
        "--shots",
        "100000",
        "--seed",
        "2",
        "--csv",
        path(&csv),
    ]);
    let r = json(&["compare", path(&csv)]);
    assert_eq!(r["verdict"], "quantum_closer");
}

#[test]
fn compare_reports_schema_path_for_bad_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d.json");
    bellkit(&[
        "simulate",
        "--quantum-v",
        "0.71",
        "--shots",
        "100",
        "--out",
        path(&d),
    ]);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&d).unwrap()).unwrap();
    let counts = v["tuples"][2]["counts"].as_object_mut().unwrap();
    let first = counts.keys().next().unwrap().clone();
    let n = counts[&first].as_u64().unwrap();
    counts[&first] = (n + 1).into();
    fs::write(&d, serde_json::to_string(&v).unwrap()).unwrap();

    let out = bellkit(&["compare", path(&d)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tuples[2].counts"));
}

#[test]
fn compare_missing_file_is_io_error() {
    assert_eq!(
        bellkit(&["compare", "/nonexistent.json"]).status.code(),
        Some(4)
    );
}

#[test]
fn reproduce_passes() {
    let r = json(&["reproduce"]);
    assert_eq!(r["passed"], true);
    let v = &r["values"];
    assert_eq!(f(&v["lhv_bound"]), 2.0);
    assert_eq!(f(&v["algebraic_bound"]), 4.0);
    assert_eq!(f(&v["quantum_value_pure"]), 4.0);
    assert_eq!(f(&v["quantum_value_v071"]), 2.84);
    assert_eq!(f(&v["white_noise_max_abs_correlation"]), 0.0);
}

fn checks(r: &Value) -> Vec<(String, bool)> {
    r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            (
                c["name"].as_str().unwrap().to_string(),
                c["pass"].as_bool().unwrap(),
            )
        })
        .collect()
}

#[test]
fn reproduce_seed_changes_only_sampled_values() {
    let a = json(&["reproduce", "--shots", "20000"]);
    let b = json(&["reproduce", "--shots", "20000", "--seed", "12345"]);
    assert_eq!(checks(&a), checks(&b));
    assert_eq!(a["values"], b["values"]);
    assert_eq!(a["exact_comparison"], b["exact_comparison"]);
    assert_ne!(
        a["simulation"]["comparison"]["mermin_estimate"],
        b["simulation"]["comparison"]["mermin_estimate"]
    );
}

#[test]
fn reproduce_with_few_shots_widens_tolerance() {
    let few = json(&["reproduce", "--shots", "100"]);
    let many = json(&["reproduce", "--shots", "10000"]);
    assert_eq!(few["passed"], true);
    let se = |r: &Value| f(&r["simulation"]["comparison"]["mermin_estimate"]["stderr"]);
    let ratio = se(&few) / se(&many);
    assert!((ratio - 10.0).abs() < 2.0, "stderr ratio {ratio}");
}

#[test]
fn config_file_supplies_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"v": 1.0}"#).unwrap();
    let from_file = json(&["--config", path(&cfg), "quantum"]);
    assert_eq!(f(&from_file["bell_value"]), 4.0);
    let overridden = json(&["--config", path(&cfg), "quantum", "--v", "0.71"]);
    assert_eq!(f(&overridden["bell_value"]), 2.84);

    fs::write(&cfg, "[1, 2]").unwrap();
    assert_eq!(
        bellkit(&["--config", path(&cfg), "bounds"]).status.code(),
        Some(2)
    );
}

#[test]
fn json_report_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("b.json");
    let out = bellkit(&["--json", path(&out_path), "bounds"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("local bound"));
    let v: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["lhv_bound"], 2.0);
}
