//! End-to-end checks of the command-line contract: exit codes, report
//! content for known operators, grid ordering, and byte determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

/// Oscillation certifying a non-converging time average.
const OSCILLATION_FLOOR: f64 = 0.06;
/// Tolerance for the two-sex terminal state after a long orbit.
const ABSORB_TOL: f64 = 1e-9;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qso_lab(args: &[&str], envs: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qso-lab"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary spawns");
    Run {
        code: out.status.code().expect("no signal kills the binary"),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).expect("scratch file writes");
    path
}

fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{} unreadable: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{} unparsable: {e}", path.display()))
}

fn error_object(stderr: &str) -> (i64, String) {
    let v: Value = serde_json::from_str(stderr.trim()).expect("stderr holds a JSON error object");
    (
        v["error"]["code"].as_i64().expect("error.code"),
        v["error"]["kind"].as_str().expect("error.kind").to_string(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn classify_reports_the_inheritance_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let v0 = write_file(dir.path(), "v0.json", r#"{"family": "v0"}"#);
    let run = qso_lab(&["classify", "--spec", s(&v0)], &[]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let report: Value = serde_json::from_str(&run.stdout).expect("stdout is the report");
    assert_eq!(report["is_volterra"], json!(true));
    assert_eq!(report["ell"], json!(3));

    let snv = write_file(
        dir.path(),
        "snv.json",
        r#"{"family": "strictly_non_volterra",
            "params": {"a": 0.5, "b": 0.5, "c": 0.5, "d": 0.5, "alpha": 0.5, "beta": 0.5}}"#,
    );
    let run = qso_lab(&["classify", "--spec", s(&snv)], &[]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let report: Value = serde_json::from_str(&run.stdout).expect("stdout is the report");
    assert_eq!(report["is_volterra"], json!(false));
    assert_eq!(report["is_strictly_non_volterra"], json!(true));
}

#[test]
fn time_averages_of_the_rock_paper_scissors_operator_oscillate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(
        dir.path(),
        "exp.json",
        r#"{
            "operator": {"family": {"family": "zakharevich",
                                    "params": {"a": 1.0, "b": 1.0, "c": 1.0}}},
            "analyses": [{"analysis": "cesaro", "n": 1000000, "x0": [0.3, 0.3, 0.4]}]
        }"#,
    );
    let out1 = dir.path().join("out1");
    let run = qso_lab(
        &["run", "--spec", s(&spec), "--out", s(&out1), "--seed", "11"],
        &[],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let report = read_json(&out1.join("00-cesaro.json"));
    assert_eq!(report["verdict"], json!("oscillating"));
    assert!(report["oscillation_sup"].as_f64().unwrap() > OSCILLATION_FLOOR);

    // Same spec and seed reproduce the report byte for byte. The
    // manifest carries wall time and is exempt.
    let out2 = dir.path().join("out2");
    let run = qso_lab(
        &["run", "--spec", s(&spec), "--out", s(&out2), "--seed", "11"],
        &[],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert_eq!(
        std::fs::read(out1.join("00-cesaro.json")).unwrap(),
        std::fs::read(out2.join("00-cesaro.json")).unwrap(),
    );
    let manifest = read_json(&out1.join("manifest.json"));
    assert_eq!(manifest["seed"], json!(11));
    assert!(manifest["version"].is_string());
    assert!(manifest["wall_time_ms"].is_number());
    assert_eq!(manifest["files"], json!(["00-cesaro.json"]));
}

#[test]
fn two_sex_population_collapses_to_the_empty_body() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(
        dir.path(),
        "exp.json",
        r#"{
            "operator": {"family": {"family": "f_qso", "params": {
                "m": 2, "females": [1],
                "fertility": [{"female": 1, "male": 2, "distribution":
                    [0.3333333333333333, 0.3333333333333333, 0.3333333333333333]}]}}},
            "analyses": [
                {"analysis": "fixed-points"},
                {"analysis": "simulate", "n": 1000, "x0": [0.0, 0.5, 0.5]}
            ]
        }"#,
    );
    let out = dir.path().join("out");
    let run = qso_lab(&["run", "--spec", s(&spec), "--out", s(&out)], &[]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);

    let fps = read_json(&out.join("00-fixed-points.json"));
    let points = fps["points"].as_array().unwrap();
    assert_eq!(points.len(), 1);
    assert!((points[0]["point"][0].as_f64().unwrap() - 1.0).abs() < ABSORB_TOL);
    assert_eq!(points[0]["stability"], json!("attracting"));

    let sim = read_json(&out.join("01-simulate.json"));
    assert!(sim["final"][0].as_f64().unwrap() > 1.0 - ABSORB_TOL);

    let csv = std::fs::read_to_string(out.join("01-trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,x1,x2,x3"));
    assert!(lines.next().unwrap().starts_with("0,"));
}

#[test]
fn bad_inputs_follow_the_exit_code_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    // Absent spec file: parse failure.
    let ghost = dir.path().join("ghost.json");
    let run = qso_lab(&["run", "--spec", s(&ghost), "--out", s(&out)], &[]);
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
    assert_eq!(error_object(&run.stderr), (2, "parse".to_string()));

    // Operator naming an absent tensor file: parse failure.
    let dangling = write_file(
        dir.path(),
        "dangling.json",
        r#"{"operator": {"tensor_file": "ghost.json"},
            "analyses": [{"analysis": "classify"}]}"#,
    );
    let run = qso_lab(&["run", "--spec", s(&dangling), "--out", s(&out)], &[]);
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
    assert_eq!(error_object(&run.stderr).1, "parse");

    // Rows that do not sum to one: the operator fails validation.
    let bad = write_file(
        dir.path(),
        "bad.json",
        r#"{"m": 2, "entries": [[[0.9, 0.0], [0.5, 0.5]], [[0.5, 0.5], [0.0, 1.0]]]}"#,
    );
    let run = qso_lab(&["classify", "--spec", s(&bad)], &[]);
    assert_eq!(run.code, 3, "stderr: {}", run.stderr);
    assert_eq!(error_object(&run.stderr).1, "validation");

    // Itinerary balls that overlap: the analysis cannot run.
    let itin = write_file(
        dir.path(),
        "itin.json",
        r#"{
            "operator": {"family": {"family": "zakharevich",
                                    "params": {"a": 1.0, "b": 1.0, "c": 1.0}}},
            "analyses": [{"analysis": "itinerary", "n": 100, "radius": 0.4,
                          "x0": [0.3, 0.3, 0.4]}]
        }"#,
    );
    let run = qso_lab(&["run", "--spec", s(&itin), "--out", s(&out)], &[]);
    assert_eq!(run.code, 4, "stderr: {}", run.stderr);
    assert_eq!(error_object(&run.stderr).1, "runtime");

    // Reduction needs a gibbs source.
    let red = write_file(
        dir.path(),
        "red.json",
        r#"{"operator": {"family": {"family": "v0"}},
            "analyses": [{"analysis": "reduction"}]}"#,
    );
    let run = qso_lab(&["run", "--spec", s(&red), "--out", s(&out)], &[]);
    assert_eq!(run.code, 4, "stderr: {}", run.stderr);
    assert_eq!(error_object(&run.stderr).1, "runtime");

    // Run needs an output directory.
    let run = qso_lab(&["run", "--spec", s(&red)], &[]);
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);

    // An experiment without analyses has nothing to do.
    let empty = write_file(
        dir.path(),
        "empty.json",
        r#"{"operator": {"family": {"family": "v0"}}, "analyses": []}"#,
    );
    let run = qso_lab(&["run", "--spec", s(&empty), "--out", s(&out)], &[]);
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
    assert_eq!(error_object(&run.stderr).1, "parse");
}

#[test]
fn a_failing_cell_does_not_stop_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    // The first interaction strength is outside [-1, 1], so its cell
    // fails validation; the second cell still runs.
    let spec = write_file(
        dir.path(),
        "sweep.json",
        r#"{
            "family": {"family": "zakharevich", "params": {"a": 1.0, "b": 1.0, "c": 1.0}},
            "grid": [{"param": "a", "values": [2.0, 0.5]}],
            "analysis": {"analysis": "cesaro", "n": 1000, "x0": [0.3, 0.3, 0.4]}
        }"#,
    );
    let out = dir.path().join("out");
    let run = qso_lab(&["sweep", "--spec", s(&spec), "--out", s(&out)], &[]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    let bad: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(bad[0], "2.0");
    assert_eq!(bad[1], "", "diagnostics stay empty for a failed cell");
    assert!(bad[5].contains("outside"), "error column: {}", bad[5]);
    let good: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(good[0], "0.5");
    assert_eq!(good[5], "");
    assert!(!good[1].is_empty());
}

#[test]
fn strict_simplex_rejects_an_off_simplex_start() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(
        dir.path(),
        "exp.json",
        r#"{
            "operator": {"family": {"family": "v0"}},
            "analyses": [{"analysis": "simulate", "n": 10, "x0": [0.3, 0.3, 0.5]}]
        }"#,
    );
    let out = dir.path().join("out");
    let run = qso_lab(
        &[
            "run",
            "--spec",
            s(&spec),
            "--out",
            s(&out),
            "--strict-simplex",
        ],
        &[],
    );
    assert_eq!(run.code, 3, "stderr: {}", run.stderr);
    assert_eq!(error_object(&run.stderr).1, "validation");

    // Without the flag the start renormalizes and the run succeeds.
    let run = qso_lab(&["run", "--spec", s(&spec), "--out", s(&out)], &[]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
}

#[test]
fn sweep_rows_follow_grid_order_whatever_the_scheduling() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(
        dir.path(),
        "sweep.json",
        r#"{
            "family": {"family": "zakharevich", "params": {"a": 1.0, "b": 1.0, "c": 1.0}},
            "grid": [
                {"param": "a", "values": [-0.5, 0.0, 0.5]},
                {"param": "b", "values": [-0.5, 0.0, 0.5]},
                {"param": "c", "values": [-0.5, 0.0, 0.5]}
            ],
            "analysis": {"analysis": "cesaro", "n": 100000, "x0": [0.3, 0.3, 0.4]}
        }"#,
    );
    let out1 = dir.path().join("out1");
    let run = qso_lab(
        &[
            "sweep", "--spec", s(&spec), "--out", s(&out1), "--seed", "5",
        ],
        &[("QSO_LAB_THREADS", "3")],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);

    let csv = std::fs::read_to_string(out1.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "a,b,c,oscillation_sup,boundary_proximity,rate,verdict,error"
    );
    assert_eq!(lines.len(), 28);

    let vals = ["-0.5", "0.0", "0.5"];
    let mut expected = Vec::new();
    for a in vals {
        for b in vals {
            for c in vals {
                expected.push([a, b, c]);
            }
        }
    }
    for (row, want) in lines[1..].iter().zip(&expected) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(&cols[..3], want);
        assert_eq!(cols[7], "", "cell {want:?} failed: {}", cols[7]);
        let verdict = cols[6];
        if want == &["0.5", "0.5", "0.5"] || want == &["-0.5", "-0.5", "-0.5"] {
            // Interaction strengths of one strict sign break time averages.
            assert_eq!(verdict, "oscillating");
        }
        if want == &["0.0", "0.0", "0.0"] {
            // The identity operator converges trivially.
            assert_eq!(verdict, "converging");
        }
    }

    // A different worker count must not change a byte of the table.
    let out2 = dir.path().join("out2");
    let run = qso_lab(
        &[
            "sweep", "--spec", s(&spec), "--out", s(&out2), "--seed", "5",
        ],
        &[("QSO_LAB_THREADS", "1")],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert_eq!(
        std::fs::read(out1.join("sweep.csv")).unwrap(),
        std::fs::read(out2.join("sweep.csv")).unwrap(),
    );
}

#[test]
fn lambda_grid_catches_the_stability_flip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(
        dir.path(),
        "lam.json",
        r#"{
            "family": {"family": "v_lambda", "params": {"lambda": 0.5}},
            "grid": [{"param": "lambda",
                      "values": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]}],
            "analysis": {"analysis": "fixed-points"}
        }"#,
    );
    let out = dir.path().join("out");
    let run = qso_lab(
        &["sweep", "--spec", s(&spec), "--out", s(&out), "--seed", "3"],
        &[],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "lambda,n_points,n_attracting,n_repelling,n_saddle,n_nonhyperbolic,error"
    );
    assert_eq!(lines.len(), 12);
    let row = |i: usize| -> Vec<&str> { lines[i].split(',').collect() };
    // At one end the interior point attracts and the vertices repel; at
    // the other it repels and nothing attracts.
    let first = row(1);
    assert_eq!(&first[..4], &["0.0", "4", "1", "3"]);
    let last = row(11);
    assert_eq!(last[0], "1.0");
    assert_eq!(last[2], "0");
    assert_ne!(last[3], "0");
}

#[test]
fn single_cell_sweep_agrees_with_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let sweep_spec = write_file(
        dir.path(),
        "sweep.json",
        r#"{
            "family": {"family": "v_lambda", "params": {"lambda": 0.5}},
            "grid": [{"param": "lambda", "values": [0.3]}],
            "analysis": {"analysis": "cesaro", "n": 4096}
        }"#,
    );
    let run_spec = write_file(
        dir.path(),
        "run.json",
        r#"{
            "operator": {"family": {"family": "v_lambda", "params": {"lambda": 0.3}}},
            "analyses": [{"analysis": "cesaro", "n": 4096}]
        }"#,
    );
    let sweep_out = dir.path().join("sweep_out");
    let run_out = dir.path().join("run_out");
    let r = qso_lab(
        &[
            "sweep", "--spec", s(&sweep_spec), "--out", s(&sweep_out), "--seed", "21",
        ],
        &[],
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let r = qso_lab(
        &[
            "run", "--spec", s(&run_spec), "--out", s(&run_out), "--seed", "21",
        ],
        &[],
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);

    // Cell 0 of a sweep and analysis 0 of a run draw the same seed from
    // the chain, so the sampled start and the diagnostic must agree.
    let csv = std::fs::read_to_string(sweep_out.join("sweep.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let report = read_json(&run_out.join("00-cesaro.json"));
    let sup = report["oscillation_sup"].as_f64().unwrap();
    assert_eq!(row[1], format!("{sup:.16e}"));
    assert_eq!(row[4], report["verdict"].as_str().unwrap());
    assert_eq!(row[5], "");
}

#[test]
fn constructed_tensor_keeps_the_connected_graph_volterra() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(
        dir.path(),
        "gibbs.json",
        r#"{
            "n_vertices": 2,
            "edges": [[0, 1]],
            "alleles": ["A", "B"],
            "measure": {"AA": 0.1, "AB": 0.2, "BA": 0.3, "BB": 0.4}
        }"#,
    );
    let out = dir.path().join("out");
    let run = qso_lab(&["construct-gibbs", "--spec", s(&spec), "--out", s(&out)], &[]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);

    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["n_cells"], json!(4));
    assert_eq!(summary["n_components"], json!(1));
    assert_eq!(summary["is_volterra"], json!(true));

    let tensor = out.join("tensor.json");
    let run = qso_lab(&["classify", "--spec", s(&tensor)], &[]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let report: Value = serde_json::from_str(&run.stdout).unwrap();
    assert_eq!(report["is_volterra"], json!(true));
    assert_eq!(report["m"], json!(4));
}

#[test]
fn product_measure_reduces_across_components() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(
        dir.path(),
        "exp.json",
        r#"{
            "operator": {"gibbs": {
                "n_vertices": 2,
                "edges": [],
                "alleles": ["A", "B"],
                "measure": {"AA": 0.12, "AB": 0.18, "BA": 0.28, "BB": 0.42}
            }},
            "analyses": [{"analysis": "reduction", "n_trajectories": 4, "n_steps": 50}]
        }"#,
    );
    let out = dir.path().join("out");
    let run = qso_lab(&["run", "--spec", s(&spec), "--out", s(&out)], &[]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let report = read_json(&out.join("00-reduction.json"));
    assert_eq!(report["reducible"], json!(true));
    assert_eq!(report["n_components"], json!(2));
    assert!(report["worst_deviation"].as_f64().unwrap() < 1e-10);
}

#[test]
fn family_materializes_an_operator_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(
        dir.path(),
        "zak.json",
        r#"{"family": "zakharevich", "params": {"a": 1.0, "b": 1.0, "c": 1.0}}"#,
    );
    let out = dir.path().join("out");
    let run = qso_lab(&["family", "--spec", s(&spec), "--out", s(&out)], &[]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["kind"], json!("skew"));
    assert_eq!(summary["m"], json!(3));
    assert_eq!(summary["origin"]["ergodic_failure_predicted"], json!(true));

    let operator = out.join("operator.json");
    let run = qso_lab(&["classify", "--spec", s(&operator)], &[]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let report: Value = serde_json::from_str(&run.stdout).unwrap();
    assert_eq!(report["is_volterra"], json!(true));

    // The subcommand writes files, so the output directory is required.
    let run = qso_lab(&["family", "--spec", s(&spec)], &[]);
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
}
