use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin(dir: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_strokeauth"));
    c.env("STROKEAUTH_OUT_DIR", dir);
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.trim()).unwrap_or_else(|_| panic!("not JSON: {line}"))
}

const FAST: &[&str] = &["--states", "2,3", "--mixtures", "1,2"];

/// 3 users, 2 days x 2 sessions x 8 strokes of each type.
fn synth(dir: &Path) -> PathBuf {
    ok(
        dir,
        &[
            "synth",
            "--users",
            "3",
            "--sessions-per-day",
            "2",
            "--strokes-per-session",
            "8",
            "--seed",
            "5",
        ],
    );
    dir.join("synthetic.csv")
}

#[test]
fn enroll_is_reproducible_and_inspectable() {
    let tmp = TempDir::new().unwrap();
    let csv = synth(tmp.path());
    let csv = csv.to_str().unwrap();
    let args = [
        &[
            "enroll",
            "--input",
            csv,
            "--user",
            "2",
            "--stroke-type",
            "vertical",
        ],
        FAST,
    ]
    .concat();
    let stdout = ok(tmp.path(), &args);
    assert!(stdout.contains("selected"));
    let template = tmp.path().join("template_user2_vertical.json");
    let first = fs::read(&template).unwrap();
    ok(tmp.path(), &[args.as_slice(), &["--sequential"]].concat());
    assert_eq!(first, fs::read(&template).unwrap());

    let shown = ok(tmp.path(), &["inspect", template.to_str().unwrap()]);
    assert!(shown.contains("stroke type   vertical"));
    assert!(shown.contains("state 0:"));
}

#[test]
fn missing_user_and_empty_input_are_data_errors() {
    let tmp = TempDir::new().unwrap();
    let csv = synth(tmp.path());
    let out = run(
        tmp.path(),
        &["enroll", "--input", csv.to_str().unwrap(), "--user", "42"],
    );
    assert_eq!(out.status.code(), Some(3));
    let err = error_json(&out);
    assert_eq!(err["error"], "UserNotFound");
    assert!(err["message"].as_str().unwrap().contains("user not found"));

    let args = [
        &["enroll", "--input", csv.to_str().unwrap(), "--user", "1"],
        FAST,
    ]
    .concat();
    ok(tmp.path(), &args);
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let template = tmp.path().join("template_user1_horizontal.json");
    let out = run(
        tmp.path(),
        &[
            "score",
            "--template",
            template.to_str().unwrap(),
            "--input",
            empty.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"], "EmptyFile");
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(
        run(tmp.path(), &["enroll", "--bogus"]).status.code(),
        Some(2)
    );
    let out = run(tmp.path(), &["synth", "--separation", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "Usage");
}

#[test]
fn scoring_training_strokes_centres_the_likelihood_distance() {
    let tmp = TempDir::new().unwrap();
    let csv = synth(tmp.path());
    let csv = csv.to_str().unwrap();
    ok(
        tmp.path(),
        &[&["enroll", "--input", csv, "--user", "3"], FAST].concat(),
    );
    let template = tmp.path().join("template_user3_horizontal.json");
    let out = run(
        tmp.path(),
        &[
            "score",
            "--template",
            template.to_str().unwrap(),
            "--input",
            csv,
            "--user",
            "3",
            "--window",
            "500",
        ],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));

    let scores = fs::read_to_string(tmp.path().join("scores.csv")).unwrap();
    let mut lines = scores.lines();
    assert_eq!(
        lines.next().unwrap(),
        "user_id,claimed_id,stroke_type,stroke_index,s_l,s_k,s_c"
    );
    // d_l = -P ln(s_l) with P = 5 features.
    let d_l: Vec<f64> = lines
        .map(|l| -5.0 * l.split(',').nth(4).unwrap().parse::<f64>().unwrap().ln())
        .collect();
    assert_eq!(d_l.len(), 32);
    let mean = d_l.iter().sum::<f64>() / d_l.len() as f64;
    assert!(mean.abs() < 1e-9, "{mean}");
    let fused = fs::read_to_string(tmp.path().join("fused_scores.csv")).unwrap();
    assert_eq!(fused.lines().count(), 1);
}

#[test]
fn evaluate_writes_reproducible_reports() {
    let tmp = TempDir::new().unwrap();
    let csv = synth(tmp.path());
    let csv = csv.to_str().unwrap();
    let args = [
        &[
            "evaluate",
            "--input",
            csv,
            "--windows",
            "1,3",
            "--seed",
            "2",
        ],
        FAST,
    ]
    .concat();
    let stdout = ok(tmp.path(), &args);
    assert!(stdout.contains("horizontal: 3 users"));
    let report_path = tmp.path().join("report.json");
    let first = fs::read_to_string(&report_path).unwrap();
    let report: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(report["scenario"], "short_term");
    assert_eq!(
        report["stroke_types"][0]["users"].as_array().unwrap().len(),
        3
    );
    let curve = tmp.path().join("curves").join("vertical_user2_w3.csv");
    assert!(fs::read_to_string(curve)
        .unwrap()
        .starts_with("threshold,far,frr\n-inf,1,0\n"));

    ok(tmp.path(), &args);
    assert_eq!(first, fs::read_to_string(&report_path).unwrap());
}

#[test]
fn long_term_lists_users_without_a_later_day() {
    let tmp = TempDir::new().unwrap();
    let csv = synth(tmp.path());
    // Drop user 3's second-day sessions (documents 3 and 4).
    let text = fs::read_to_string(&csv).unwrap();
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| {
            let f: Vec<&str> = l.split(',').collect();
            !(f[1] == "3" && (f[2] == "3" || f[2] == "4"))
        })
        .collect();
    let trimmed = tmp.path().join("trimmed.csv");
    fs::write(&trimmed, kept.join("\n")).unwrap();
    let args = [
        &[
            "evaluate",
            "--input",
            trimmed.to_str().unwrap(),
            "--scenario",
            "long_term",
            "--windows",
            "1",
            "--no-curves",
        ],
        FAST,
    ]
    .concat();
    let stdout = ok(tmp.path(), &args);
    assert!(stdout.contains("excluded user 3"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["excluded"][0]["user_id"], 3);
    assert!(!tmp.path().join("curves").exists());
}
