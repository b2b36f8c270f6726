//! End-to-end tests of the command-line interface: file formats, exit
//! codes, determinism, and agreement between output formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_abmediate")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn abmediate")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const DEMO_SPEC: &str = r#"{
  "k_upstream": 1,
  "j_downstream": 1,
  "alpha0": [0.5], "beta0": [0.4],
  "alpha1": 1.0, "beta1": 0.6, "psi1": [0.7], "xi1": [0.2],
  "alpha2": [-0.3], "beta2": [0.25],
  "Psi2": [[0.0]], "Xi2": [[0.0]],
  "psi3": [0.45], "xi3": [0.1],
  "alpha3": 0.2, "beta3": 0.3,
  "gamma0": [0.0], "gamma1": 0.8, "gamma2": [0.55],
  "kappa0": [0.0], "kappa1": 0.15, "kappa2": [0.2],
  "noise": {
    "m0": [{"normal": {"std": 1.0}}],
    "m1": {"centered_uniform": {"half_width": 1.5}},
    "m2": [{"normal": {"std": 1.0}}],
    "y": {"normal": {"std": 1.0}}
  },
  "p_treat": 0.5
}"#;

const NULL_SPEC: &str = r#"{
  "k_upstream": 0,
  "j_downstream": 0,
  "alpha0": [], "beta0": [],
  "alpha1": 1.0, "beta1": 0.0, "psi1": [], "xi1": [],
  "alpha2": [], "beta2": [],
  "Psi2": [], "Xi2": [],
  "psi3": [], "xi3": [],
  "alpha3": 0.2, "beta3": 0.0,
  "gamma0": [], "gamma1": 0.8, "gamma2": [],
  "kappa0": [], "kappa1": 0.0, "kappa2": [],
  "noise": {
    "m0": [],
    "m1": {"normal": {"std": 1.0}},
    "m2": [],
    "y": {"normal": {"std": 1.0}}
  },
  "p_treat": 0.5
}"#;

fn write_spec(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn simulate(dir: &Path, spec: &str, n: usize, seed: u64, out: &str) {
    write_spec(dir, "spec.json", spec);
    let status = run(
        dir,
        &[
            "simulate",
            "--spec",
            "spec.json",
            "--n",
            &n.to_string(),
            "--seed",
            &seed.to_string(),
            "--out",
            out,
        ],
    );
    assert!(status.status.success(), "{}", stderr(&status));
}

#[test]
fn simulate_writes_header_plus_n_rows() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), NULL_SPEC, 100, 1, "tiny");
    let csv = std::fs::read_to_string(dir.path().join("tiny.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0], "T,M1,Y");
}

#[test]
fn simulate_is_deterministic_in_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), DEMO_SPEC, 2_000, 9, "a");
    simulate(dir.path(), DEMO_SPEC, 2_000, 9, "b");
    simulate(dir.path(), DEMO_SPEC, 2_000, 10, "c");
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    let c = std::fs::read(dir.path().join("c.csv")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let ta = std::fs::read(dir.path().join("a.truth.json")).unwrap();
    let tb = std::fs::read(dir.path().join("b.truth.json")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn simulate_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "spec.json", DEMO_SPEC);
    for (threads, out) in [("1", "t1"), ("3", "t3")] {
        let status = run(
            dir.path(),
            &[
                "simulate", "--spec", "spec.json", "--n", "5000", "--seed", "4", "--out", out,
                "--threads", threads,
            ],
        );
        assert!(status.status.success(), "{}", stderr(&status));
    }
    let a = std::fs::read(dir.path().join("t1.csv")).unwrap();
    let b = std::fs::read(dir.path().join("t3.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn truth_of_a_null_spec_is_exactly_zero() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), NULL_SPEC, 100, 1, "null");
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("null.truth.json")).unwrap())
            .unwrap();
    for key in ["gade0", "gade1", "gacme0", "gacme1", "ate"] {
        assert_eq!(truth[key].as_f64().unwrap(), 0.0, "{key}");
    }
    assert_eq!(truth["theta_true"]["theta_m10"].as_f64().unwrap(), 1.0);
}

#[test]
fn simulate_rejects_malformed_specs() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "bad.json", "{\"k_upstream\": 1}");
    let out = run(
        dir.path(),
        &["simulate", "--spec", "bad.json", "--n", "10", "--out", "x"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("SpecParse"));

    // dimensionally inconsistent spec
    let bad = DEMO_SPEC.replace("\"psi1\": [0.7]", "\"psi1\": [0.7, 0.1]");
    write_spec(dir.path(), "dims.json", &bad);
    let out = run(
        dir.path(),
        &["simulate", "--spec", "dims.json", "--n", "10", "--out", "x"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("DimensionMismatch"));
}

#[test]
fn analyze_json_satisfies_the_decomposition_identity() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), DEMO_SPEC, 20_000, 5, "d");
    let out = run(
        dir.path(),
        &[
            "analyze", "--input", "d.csv", "--treatment-col", "T", "--mediator-col", "M1",
            "--outcome-col", "Y", "--format", "json",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let v = |k: &str| doc[k]["value"].as_f64().unwrap();
    let ate = v("ate");
    assert!((ate - (v("gade0") + v("gacme1"))).abs() < 1e-10);
    assert!((ate - (v("gade1") + v("gacme0"))).abs() < 1e-10);
    assert!(doc["converged"].as_bool().unwrap());
    assert_eq!(doc["n"].as_u64().unwrap(), 20_000);
    assert_eq!(doc["covariance"].as_array().unwrap().len(), 6);
}

#[test]
fn analyze_misspelled_column_exits_2_with_the_error_name() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), NULL_SPEC, 200, 2, "m");
    let out = run(
        dir.path(),
        &[
            "analyze", "--input", "m.csv", "--treatment-col", "treat", "--mediator-col", "M1",
            "--outcome-col", "Y",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("MissingColumn"));
}

#[test]
fn analyze_estimation_failure_exits_3_with_the_error_name() {
    let dir = tempfile::tempdir().unwrap();
    // constant outcome: moments are degenerate
    let mut csv = String::from("T,M1,Y\n");
    for i in 0..40 {
        csv.push_str(&format!("{},{},1.0\n", i % 2, i));
    }
    std::fs::write(dir.path().join("const.csv"), csv).unwrap();
    let out = run(
        dir.path(),
        &[
            "analyze", "--input", "const.csv", "--treatment-col", "T", "--mediator-col", "M1",
            "--outcome-col", "Y",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("SingularOmega"));

    // constant mediator within arms: singular design
    let mut csv = String::from("T,M1,Y\n");
    for i in 0..40 {
        csv.push_str(&format!("{},{},{}\n", i % 2, i % 2, i));
    }
    std::fs::write(dir.path().join("flat.csv"), csv).unwrap();
    let out = run(
        dir.path(),
        &[
            "analyze", "--input", "flat.csv", "--treatment-col", "T", "--mediator-col", "M1",
            "--outcome-col", "Y",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("SingularDesign"));
}

#[test]
fn analyze_reads_gzip_input() {
    use std::io::Write;

    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), DEMO_SPEC, 3_000, 6, "g");
    let plain = std::fs::read(dir.path().join("g.csv")).unwrap();
    let mut enc =
        flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(&plain).unwrap();
    std::fs::write(dir.path().join("g.csv.gz"), enc.finish().unwrap()).unwrap();

    let args = |input: &'static str| {
        [
            "analyze", "--input", input, "--treatment-col", "T", "--mediator-col", "M1",
            "--outcome-col", "Y", "--format", "csv",
        ]
    };
    let a = run(dir.path(), &args("g.csv"));
    let b = run(dir.path(), &args("g.csv.gz"));
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn text_and_json_agree_after_display_rounding() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), DEMO_SPEC, 10_000, 8, "t");
    let base = [
        "analyze", "--input", "t.csv", "--treatment-col", "T", "--mediator-col", "M1",
        "--outcome-col", "Y",
    ];
    let text_out = run(dir.path(), &base);
    let mut json_args = base.to_vec();
    json_args.extend(["--format", "json"]);
    let json_out = run(dir.path(), &json_args);
    assert!(text_out.status.success() && json_out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&json_out)).unwrap();
    let text = stdout(&text_out);

    for (label, key) in [
        ("GADE(0)", "gade0"),
        ("GADE(1)", "gade1"),
        ("GACME(0)", "gacme0"),
        ("GACME(1)", "gacme1"),
        ("ATE", "ate"),
    ] {
        let line = text
            .lines()
            .find(|l| l.starts_with(label))
            .unwrap_or_else(|| panic!("no row for {label}"));
        let cells: Vec<&str> = line.split_whitespace().collect();
        let pct: f64 = cells[1].trim_end_matches('%').parse().unwrap();
        let se_pct: f64 = cells[2].parse().unwrap();
        let value: f64 = cells[3].parse().unwrap();
        let se: f64 = cells[4].parse().unwrap();

        let j = &doc[key];
        let want_pct = j["pct_change"].as_f64().unwrap() * 100.0;
        let want_se_pct = j["pct_std_error"].as_f64().unwrap() * 100.0;
        let want_value = j["value"].as_f64().unwrap();
        let want_se = j["std_error"].as_f64().unwrap();
        // 4 decimals on percents, 6 significant figures elsewhere
        assert!((pct - want_pct).abs() <= 5.1e-5, "{label} pct");
        assert!(
            (se_pct - want_se_pct).abs() <= 1e-5 * (1.0 + want_se_pct.abs()),
            "{label} se_pct"
        );
        assert!(
            (value - want_value).abs() <= 1e-5 * (1.0 + want_value.abs()),
            "{label} value"
        );
        assert!((se - want_se).abs() <= 1e-5 * (1.0 + want_se.abs()), "{label} se");
    }
}

#[test]
fn analyze_recovers_ground_truth_on_a_large_simulation() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), DEMO_SPEC, 1_000_000, 12, "big");
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("big.truth.json")).unwrap())
            .unwrap();
    let out = run(
        dir.path(),
        &[
            "analyze", "--input", "big.csv", "--treatment-col", "T", "--mediator-col", "M1",
            "--outcome-col", "Y", "--format", "json",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in ["gade0", "gade1", "gacme0", "gacme1", "ate"] {
        let est = doc[key]["value"].as_f64().unwrap();
        let se = doc[key]["std_error"].as_f64().unwrap();
        let want = truth[key].as_f64().unwrap();
        assert!(
            (est - want).abs() <= 4.0 * se,
            "{key}: {est} vs {want} (se {se})"
        );
    }
}

#[test]
fn validate_identity_suite_passes_and_prints_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["validate", "--suite", "identity", "--reps", "4", "--seed", "3"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("[PASS]"));
    assert!(text.contains("observed"));
    assert!(text.contains("required"));
    assert!(text.contains("suite identity:"));
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn validate_rejects_unknown_suites() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["validate", "--suite", "bogus"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("identity|consistency|coverage|delta"));
}
