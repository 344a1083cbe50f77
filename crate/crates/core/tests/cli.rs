//! Black-box tests of the command-line interface: exit codes, config echo,
//! record emission and re-ingestion, and output determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bayesborrow");

fn data_csv() -> String {
    format!("{}/data/zirgan.csv", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn analyze_is_deterministic_and_echoes_config() {
    let args = [
        "analyze",
        "--data",
        &data_csv(),
        "--phase",
        "2",
        "--margin",
        "0.9:0.12",
    ];
    let first = run(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = run(&args);
    assert_eq!(stdout(&first), stdout(&second));

    let text = stdout(&first);
    assert!(text.contains("# analyze:"));
    assert!(text.contains("# studies (3): 4, 5, 6"));
    assert!(text.contains("# tau prior: half-normal, scale 0.5"));
    assert!(text.contains("RR threshold 0.8667"));
    assert!(text.contains("P(mu > threshold) = 0.971"));
    assert!(text.contains("P(theta-star > threshold) = 0.920"));
}

#[test]
fn usage_errors_exit_with_2() {
    for args in [
        vec!["analyze"],                                        // missing --data
        vec!["analyze", "--data", "x.csv", "--margin", "0.9"],  // malformed margin
        vec!["analyze", "--data", "x.csv", "--tau-prior", "cauchy:1"],
        vec!["bogus-subcommand"],
        vec!["oc", "--grid", "g.toml", "--rule", "nonsense"],
    ] {
        let out = run(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "args {args:?} gave {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
    }
    // ess on a pure-evidence dataset without --reference is also a usage error
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("ev.jsonl");
    fs::write(
        &records,
        "{\"record\":\"evidence\",\"study_id\":\"a\",\"phase\":2,\"y\":0.1,\"s\":0.2}\n",
    )
    .unwrap();
    let out = run(&["ess", "--data", records.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--reference"));
}

#[test]
fn data_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();

    let out = run(&["analyze", "--data", "no-such-file.csv"]);
    assert_eq!(out.status.code(), Some(3));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "study_id,r_t,n_t,r_c,n_c,phase\na,30,23,16,22,2\n").unwrap();
    let out = run(&["analyze", "--data", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("line 2"), "error should cite the line: {err}");

    // filters that empty the dataset are data errors, not silent successes
    let out = run(&["analyze", "--data", &data_csv(), "--include", "nope"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn numerical_failures_exit_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("degenerate.jsonl");
    fs::write(
        &records,
        "{\"record\":\"evidence\",\"study_id\":\"a\",\"phase\":2,\"y\":0.0,\"s\":1e-300}\n",
    )
    .unwrap();
    let out = run(&["analyze", "--data", records.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn emitted_records_reproduce_the_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let first_records = dir.path().join("first.jsonl");
    let out = run(&[
        "analyze",
        "--data",
        &data_csv(),
        "--phase",
        "2",
        "--margin",
        "0.9:0.12",
        "--records",
        first_records.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    // feed the evidence records back in; summaries must match to 1e-9
    let second_records = dir.path().join("second.jsonl");
    let out2 = run(&[
        "analyze",
        "--data",
        first_records.to_str().unwrap(),
        "--margin",
        "0.9:0.12",
        "--records",
        second_records.to_str().unwrap(),
    ]);
    assert!(out2.status.success(), "{}", String::from_utf8_lossy(&out2.stderr));

    let summaries = |path: &Path| -> Vec<serde_json::Value> {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
            .filter(|v| v["record"] == "summary" || v["record"] == "tail")
            .collect()
    };
    let a = summaries(&first_records);
    let b = summaries(&second_records);
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x["record"], y["record"]);
        assert_eq!(x["target"], y["target"]);
        for key in ["mean", "sd", "probability"] {
            if let (Some(xa), Some(ya)) = (x[key].as_f64(), y[key].as_f64()) {
                assert!(
                    (xa - ya).abs() < 1e-9,
                    "{key} differs after round trip: {xa} vs {ya}"
                );
            }
        }
    }
}

#[test]
fn oc_renders_infeasible_cells_as_dashes() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.toml");
    fs::write(
        &grid,
        r#"
[design]
n_per_arm = 12
p_control = 0.9
margin_abs = 0.12

[grid]
p_control = [0.90]
delta = [0.0, 0.12]
"#,
    )
    .unwrap();
    let out = run(&[
        "oc",
        "--grid",
        grid.to_str().unwrap(),
        "--nsim",
        "20",
        "--seed",
        "5",
        "--rule",
        "meta",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("--"), "infeasible cell should render as --:\n{text}");
    assert!(text.contains("meta-analytic"));
}

#[test]
fn case_study_declares_the_expected_decisions() {
    let out = run(&["case-study", "--stage", "all"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("interim borrowing success"));
    assert!(text.contains("interim standalone failure"));
    assert!(text.contains("final borrowing success"));
    assert!(text.contains("final standalone success"));
}

#[test]
fn prior_summary_is_seed_stable() {
    let args = ["prior-summary", "--draws", "50000", "--seed", "11"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("tau prior: median 0.3372"));
}
