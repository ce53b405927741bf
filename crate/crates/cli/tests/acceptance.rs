//! Acceptance suite for the desk-scale correlation studies and the CLI
//! determinism contract.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use regretcal::sweep::{correlation_table, desk_suite, execute_suite, RunOutcome};

fn desk_outcomes() -> &'static (Vec<RunOutcome>, f64) {
    static OUTCOMES: OnceLock<(Vec<RunOutcome>, f64)> = OnceLock::new();
    OUTCOMES.get_or_init(|| {
        let started = Instant::now();
        let suite = desk_suite(20_000);
        assert_eq!(suite.runs.len(), 60);
        let outcomes = execute_suite(&suite, None).expect("suite runs");
        (outcomes, started.elapsed().as_secs_f64())
    })
}

fn r2_of(outcomes: &[RunOutcome], estimator: &str, method: &str) -> f64 {
    correlation_table(outcomes)
        .into_iter()
        .find(|(e, m, _)| e == estimator && m == method)
        .and_then(|(_, _, r2)| r2)
        .expect("correlation defined")
}

#[test]
fn criterion_07_calibration_regret_tracks_isotonic_gain() {
    let (outcomes, elapsed) = desk_outcomes();
    let r2 = r2_of(outcomes, "rcl_hat", "isotonic");
    assert!(
        r2 >= 0.75,
        "r2(rcl_hat, isotonic gain) = {r2:.3}, needs >= 0.75"
    );
    assert!(
        *elapsed < 120.0,
        "60-run suite at n = 20k took {elapsed:.1} s"
    );
    println!(
        "PASS: criterion 7 — r2(rcl_hat, isotonic gain) = {r2:.3} over 60 configurations ({elapsed:.1} s)"
    );
}

#[test]
fn criterion_08_total_regret_tracks_post_training_gain() {
    let (outcomes, _) = desk_outcomes();
    let r2_glar = r2_of(outcomes, "r_hat", "glar");
    let r2_logistic = r2_of(outcomes, "r_hat", "logistic");
    assert!(
        r2_glar >= 0.6,
        "r2(r_hat, glar gain) = {r2_glar:.3}, needs >= 0.6"
    );
    assert!(
        r2_logistic >= 0.6,
        "r2(r_hat, logistic gain) = {r2_logistic:.3}, needs >= 0.6"
    );
    println!(
        "PASS: criterion 8 — r2(r_hat, glar gain) = {r2_glar:.3}, r2(r_hat, logistic gain) = {r2_logistic:.3}"
    );
}

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_regretcal")
}

fn run_ok(args: &[&str], dir: &Path) {
    let output = Command::new(binary())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn");
    assert!(
        output.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

/// All files under a directory, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, base: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).expect("read_dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                walk(&path, base, out);
            } else {
                let key = path.strip_prefix(base).unwrap().display().to_string();
                out.insert(key, fs::read(&path).expect("read file"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Run a command twice into the same output directory (wiped in between)
/// and require every produced file to be byte-identical.
fn assert_rerun_identical(label: &str, args: &[&str], work: &Path, out_rel: &str) {
    let out_dir = work.join(out_rel);
    run_ok(args, work);
    let first = snapshot(&out_dir);
    assert!(!first.is_empty(), "{label} produced no files");
    fs::remove_dir_all(&out_dir).unwrap();
    run_ok(args, work);
    let second = snapshot(&out_dir);
    assert_eq!(
        first.keys().collect::<Vec<_>>(),
        second.keys().collect::<Vec<_>>(),
        "{label}: file sets differ between reruns"
    );
    for (name, bytes) in &first {
        assert_eq!(
            bytes, &second[name],
            "{label}: {name} differs between reruns"
        );
    }
}

#[test]
fn criterion_11_cli_reruns_are_byte_identical() {
    let work = tempfile::tempdir().unwrap();
    let work = work.path();

    fs::write(
        work.join("spec.json"),
        r#"{"kind":"random","seed":42,"n_levels":8,"atoms_per_level":3,"miscalibration":0.7,"spread":0.6,"monotone_curve":true}"#,
    )
    .unwrap();
    assert_rerun_identical(
        "simulate",
        &[
            "simulate", "--spec", "spec.json", "--n", "8000", "--seed", "5", "--out", "sim",
        ],
        work,
        "sim",
    );

    // The simulated dataset feeds the pipeline commands.
    fs::copy(work.join("sim/dataset.csv"), work.join("data.csv")).unwrap();

    assert_rerun_identical(
        "report",
        &[
            "report", "--input", "data.csv", "--out", "rep", "--seed", "3", "--tstar", "0.25,0.5",
        ],
        work,
        "rep",
    );

    for method in ["isotonic", "platt", "histogram", "threshold", "glar", "logistic"] {
        assert_rerun_identical(
            &format!("posttrain {method}"),
            &[
                "posttrain", "--input", "data.csv", "--out", "pt", "--method", method, "--seed",
                "3", "--tstar", "0.5",
            ],
            work,
            "pt",
        );
        fs::remove_dir_all(work.join("pt")).unwrap();
    }

    assert_rerun_identical(
        "advise",
        &[
            "advise", "--input", "data.csv", "--out", "adv", "--seed", "3", "--tstar", "0.5",
        ],
        work,
        "adv",
    );

    fs::write(
        work.join("suite.json"),
        r#"{"runs":[
            {"seed":1,"n_levels":6,"atoms_per_level":3,"miscalibration":0.5,"spread":0.4,"t_star":0.5,"n":4000,"monotone_curve":true},
            {"seed":2,"n_levels":6,"atoms_per_level":3,"miscalibration":0.1,"spread":0.8,"t_star":0.25,"n":4000,"monotone_curve":true}
        ]}"#,
    )
    .unwrap();
    assert_rerun_identical(
        "sweep",
        &["sweep", "--suite", "suite.json", "--out", "sw"],
        work,
        "sw",
    );

    println!("PASS: criterion 11 — simulate/report/posttrain(x6)/advise/sweep rerun byte-identically");
}

#[test]
fn exit_codes_follow_the_contract() {
    let work = tempfile::tempdir().unwrap();
    let work = work.path();

    // Data error: named missing column, exit 3.
    fs::write(work.join("bad.csv"), "y,prob\n1,0.5\n").unwrap();
    let out = Command::new(binary())
        .args(["report", "--input", "bad.csv", "--out", "o"])
        .current_dir(work)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("'score'"), "stderr: {stderr}");

    // Config error: zero samples requested, exit 2.
    fs::write(
        work.join("spec.json"),
        r#"{"kind":"lower_tight","c":0.3,"v":0.1,"t":0.5}"#,
    )
    .unwrap();
    let out = Command::new(binary())
        .args(["simulate", "--spec", "spec.json", "--n", "0", "--out", "o"])
        .current_dir(work)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Config error: inadmissible variance, exit 2.
    fs::write(
        work.join("inadmissible.json"),
        r#"{"kind":"lower_tight","c":0.1,"v":0.2,"t":0.5}"#,
    )
    .unwrap();
    let out = Command::new(binary())
        .args([
            "simulate",
            "--spec",
            "inadmissible.json",
            "--n",
            "10",
            "--out",
            "o",
        ])
        .current_dir(work)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Empty sweep suite is a usage error.
    fs::write(work.join("empty.json"), r#"{"runs":[]}"#).unwrap();
    let out = Command::new(binary())
        .args(["sweep", "--suite", "empty.json", "--out", "o"])
        .current_dir(work)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
