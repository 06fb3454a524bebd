//! End-to-end tests of the `gbl` binary: exit codes, output formats and
//! reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn gbl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbl"))
        .args(args)
        .env("GBL_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn validate_fixture_passes() {
    let belief = fixture("bivariate.json");
    let out = gbl(&["validate", "--belief", belief.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!(report["checks"].as_array().unwrap().len() >= 5);
}

#[test]
fn validate_incoherent_belief_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"ex":[0],"ed":[0],"var_x":[[1.0]],"var_d":[[1.0]],"cov_xd":[[1.5]]}"#,
    )
    .unwrap();
    let out = gbl(&["validate", "--belief", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("joint"), "{err}");
}

#[test]
fn missing_file_exits_three() {
    let out = gbl(&["validate", "--belief", "/nonexistent/belief.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_flag_exits_one_and_help_exits_zero() {
    let out = gbl(&["adjust", "--belief"]);
    assert_eq!(out.status.code(), Some(1));
    let out = gbl(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_str(&out).contains("gbl"));
}

#[test]
fn adjust_matches_worked_example_and_round_trips() {
    let belief = fixture("bivariate.json");
    let out = gbl(&[
        "adjust",
        "--belief",
        belief.to_str().unwrap(),
        "--d",
        "[3, 6.5]",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let e = parsed["expectation"].as_array().unwrap();
    assert!((e[0].as_f64().unwrap() - 1.68).abs() < 0.005);
    assert!((e[1].as_f64().unwrap() + 1.17).abs() < 0.005);
    let v = parsed["variance"].as_array().unwrap();
    let v01 = v[0].as_array().unwrap()[1].as_f64().unwrap();
    let v10 = v[1].as_array().unwrap()[0].as_f64().unwrap();
    assert_eq!(v01, v10, "round-tripped variance must stay symmetric");
    assert!((v01 - 0.123).abs() < 0.0005);
}

#[test]
fn adjust_at_prior_mean_returns_prior_expectation() {
    let belief = fixture("bivariate.json");
    let out = gbl(&[
        "adjust",
        "--belief",
        belief.to_str().unwrap(),
        "--d",
        "[1.0, 1.0]",
    ]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let e = parsed["expectation"].as_array().unwrap();
    assert_eq!(e[0].as_f64().unwrap(), 1.0);
    assert_eq!(e[1].as_f64().unwrap(), 1.0);
}

#[test]
fn adjust_reads_datum_from_csv_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("datum.csv");
    std::fs::write(&path, "value\n3.0\n6.5\n").unwrap();
    let belief = fixture("bivariate.json");
    let out = gbl(&[
        "adjust",
        "--belief",
        belief.to_str().unwrap(),
        "--data",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!((parsed["expectation"][0].as_f64().unwrap() - 1.68).abs() < 0.005);
}

#[test]
fn generalise_worked_example_through_shorthand_constraint() {
    let belief = fixture("bivariate.json");
    let out = gbl(&[
        "generalise",
        "--belief",
        belief.to_str().unwrap(),
        "--d",
        "[3, 6.5]",
        "--constraint",
        r#"{"type":"nonneg"}"#,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let e = parsed["expectation"].as_array().unwrap();
    assert!((e[0].as_f64().unwrap() - 2.02).abs() < 0.005);
    assert!(e[1].as_f64().unwrap().abs() <= 1e-9);
    assert_eq!(parsed["projection"]["active_set"][0].as_u64(), Some(1));
    assert!(parsed["projection"]["kkt_residual"].as_f64().unwrap() <= 1e-8);
    // identical invocations are byte-identical
    let again = gbl(&[
        "generalise",
        "--belief",
        belief.to_str().unwrap(),
        "--d",
        "[3, 6.5]",
        "--constraint",
        r#"{"type":"nonneg"}"#,
    ]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn generalise_accepts_alternative_shrink_and_rejects_unknown() {
    let belief = fixture("bivariate.json");
    let base = [
        "generalise",
        "--belief",
        belief.to_str().unwrap(),
        "--d",
        "[3, 6.5]",
        "--constraint",
        r#"{"type":"nonneg"}"#,
    ];
    let mut with_gauss: Vec<&str> = base.to_vec();
    with_gauss.extend(["--shrink", "gauss"]);
    let out = gbl(&with_gauss);
    assert!(out.status.success());

    let mut with_bad: Vec<&str> = base.to_vec();
    with_bad.extend(["--shrink", "nope"]);
    let out = gbl(&with_bad);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn project_reports_solution_and_infeasibility() {
    let out = gbl(&[
        "project",
        "--e",
        "[-0.5]",
        "--constraint",
        r#"{"type":"nonneg"}"#,
    ]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(parsed["q_star"][0].as_f64().unwrap(), 0.0);
    assert!((parsed["multipliers"][0].as_f64().unwrap() - 1.0).abs() < 1e-9);

    // q >= 1 and q <= 0 cannot both hold
    let out = gbl(&[
        "project",
        "--e",
        "[0.2]",
        "--constraint",
        r#"{"a":[[1.0],[-1.0]],"b":[1.0,0.0],"labels":["lo","hi"]}"#,
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn project_with_metric_uses_the_metric() {
    let out = gbl(&[
        "project",
        "--e",
        "[1.6770833333333333, -1.1666666666666667]",
        "--metric",
        "[[0.37958333333333333, 0.12333333333333334], [0.12333333333333334, 0.42333333333333334]]",
        "--constraint",
        r#"{"type":"nonneg"}"#,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!((parsed["q_star"][0].as_f64().unwrap() - 2.017).abs() < 0.001);
}

#[test]
fn study_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let config = fixture("study_small.json");
    for out_path in [&out_a, &out_b] {
        let out = gbl(&[
            "study",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout_str(&out).contains("rmse x100"));
    }
    let strip_times = |text: &str| -> Vec<String> {
        text.lines()
            .map(|line| {
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() == 7 {
                    format!("{},{},{},{},{}", cells[0], cells[1], cells[2], cells[3], cells[6])
                } else {
                    line.to_string()
                }
            })
            .collect()
    };
    let a = std::fs::read_to_string(&out_a).unwrap();
    let b = std::fs::read_to_string(&out_b).unwrap();
    assert_eq!(strip_times(&a), strip_times(&b));
    assert!(a.lines().any(|l| l.starts_with("function,method,")));
    // two functions, two methods
    assert_eq!(a.lines().filter(|l| !l.starts_with('#') && !l.starts_with("function,")).count(), 4);
}

#[test]
fn study_seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture("study_small.json");
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for (path, seed) in [(&out_a, "11"), (&out_b, "12")] {
        let out = gbl(&[
            "study",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let a = std::fs::read_to_string(&out_a).unwrap();
    let b = std::fs::read_to_string(&out_b).unwrap();
    assert_ne!(a, b, "different seeds must change the report");
}

#[test]
fn spatial_synthesises_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("spatial.csv");
    let out = gbl(&[
        "spatial",
        "--regions",
        "20",
        "--seed",
        "3",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("lat,lon,count,intensity,adjusted,generalised\n"));
    assert_eq!(text.lines().count(), 21);
    for line in text.lines().skip(1) {
        let gen: f64 = line.split(',').nth(5).unwrap().parse().unwrap();
        assert!(gen >= -1e-9, "generalised fit must be non-negative: {line}");
    }
}

#[test]
fn spatial_accepts_kernel_spec_json() {
    let out = gbl(&[
        "spatial",
        "--regions",
        "15",
        "--seed",
        "4",
        "--kernel",
        r#"{"family":"sqexp","amplitude":1.0,"length_scales":[85.0],"nugget":0.25}"#,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let bad = gbl(&["spatial", "--regions", "15", "--kernel", r#"{"family":"sqexp"}"#]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn spatial_reads_external_csv_and_rejects_bad_header() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("counts.csv");
    std::fs::write(
        &data,
        "lat,lon,count\n51.5,-0.13,4\n53.48,-2.24,0\n52.2,0.1,2\n51.45,-2.58,1\n",
    )
    .unwrap();
    let out = gbl(&["spatial", "--data", data.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_str(&out).lines().count() >= 5);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "latitude,longitude,n\n51.5,-0.13,4\n").unwrap();
    let out = gbl(&["spatial", "--data", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
