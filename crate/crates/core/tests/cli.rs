use std::path::Path;
use std::process::{Command, Output};

use cram::data::read_table;
use cram::load_model;

const BIN: &str = env!("CARGO_BIN_EXE_cram");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, n: usize, seed: u64) -> std::path::PathBuf {
    let out = dir.join(format!("synth_{n}_{seed}.csv"));
    ok(&[
        "simulate",
        "--n",
        &n.to_string(),
        "--sigma",
        "1",
        "--seed",
        &seed.to_string(),
        "--out",
        p(&out),
    ]);
    out
}

const XS: &str = "x1,x2,x3,x4";
const YS: &str = "y1,y2,y3";

#[test]
fn per_component_fit_reports_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 150, 7);
    let model = dir.path().join("m.json");
    let stdout = ok(&[
        "fit",
        "--data",
        p(&data),
        "--x",
        XS,
        "--y",
        YS,
        "--penalty",
        "per-component",
        "--lambda",
        "3,3,0,0",
        "--lambda-scale",
        "unnormalized",
        "--out",
        p(&model),
    ]);
    assert!(stdout.contains("component_ranks=1,1,3,3"), "{stdout}");
    assert!(stdout.contains("converged=true"));
    assert!(stdout.lines().any(|l| l.starts_with("objective_trace=")));
}

#[test]
fn predict_on_training_inputs_reproduces_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 80, 2);
    let model_path = dir.path().join("m.json");
    let preds = dir.path().join("pred.csv");
    ok(&[
        "fit",
        "--data",
        p(&data),
        "--x",
        XS,
        "--y",
        YS,
        "--lambda",
        "0",
        "--out",
        p(&model_path),
    ]);
    ok(&[
        "predict",
        "--model",
        p(&model_path),
        "--data",
        p(&data),
        "--out",
        p(&preds),
    ]);

    let model = load_model(&model_path).unwrap();
    let names: Vec<String> = YS.split(',').map(String::from).collect();
    let got = read_table(&preds, &names).unwrap();
    let fitted = model.standardization.restore_y(&model.fitted_values());
    assert!((got - fitted).amax() <= 1e-8);

    let stdout = ok(&["predict", "--model", p(&model_path), "--data", p(&data)]);
    assert_eq!(stdout.lines().next(), Some(YS));
    assert_eq!(stdout.lines().count(), 81);
}

#[test]
fn cv_prints_selection_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 100, 3);
    let report = dir.path().join("cv.csv");
    let stdout = ok(&[
        "cv",
        "--data",
        p(&data),
        "--x",
        XS,
        "--y",
        YS,
        "--k",
        "10",
        "--penalty",
        "joint",
        "--out",
        p(&report),
    ]);
    let line = stdout
        .lines()
        .find(|l| l.starts_with("selected_lambda="))
        .expect("selection printed");
    let lambda: f64 = line["selected_lambda=".len()..].parse().unwrap();
    assert!(lambda > 0.0);
    let text = std::fs::read_to_string(&report).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,cv_error,cv_se"));
    assert_eq!(lines.count(), 30);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), 60, 11);
    let b = dir.path().join("again.csv");
    ok(&[
        "simulate",
        "--n",
        "60",
        "--sigma",
        "1",
        "--seed",
        "11",
        "--out",
        p(&b),
    ]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let (r1, r2) = (dir.path().join("r1.csv"), dir.path().join("r2.csv"));
    for r in [&r1, &r2] {
        ok(&[
            "cv",
            "--data",
            p(&a),
            "--x",
            XS,
            "--y",
            YS,
            "--k",
            "5",
            "--grid-size",
            "8",
            "--seed",
            "4",
            "--out",
            p(r),
        ]);
    }
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
}

#[test]
fn rank_path_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 80, 5);
    let out = dir.path().join("path.csv");
    ok(&[
        "rank-path",
        "--data",
        p(&data),
        "--x",
        XS,
        "--y",
        YS,
        "--grid",
        "0,0.1,1000",
        "--out",
        p(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,rank,objective");
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1].split(',').nth(1), Some("3"));
    assert_eq!(lines[3].split(',').nth(1), Some("0"));
}

#[test]
fn certify_prints_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 80, 6);
    let stdout = ok(&[
        "certify",
        "--data",
        p(&data),
        "--x",
        "x1",
        "--y",
        YS,
        "--lambda",
        "0.2",
    ]);
    for key in ["spectral=", "orthogonality=", "range=", "stationary=true"] {
        assert!(stdout.contains(key), "{stdout}");
    }
    let out = run(&[
        "certify",
        "--data",
        p(&data),
        "--x",
        "x1,x2",
        "--y",
        YS,
        "--lambda",
        "0.2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn risk_study_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("risk.csv");
    ok(&[
        "risk-study",
        "--n-list",
        "30,60",
        "--reps",
        "5",
        "--k",
        "3",
        "--grid-size",
        "6",
        "--seed",
        "1",
        "--out",
        p(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,mean_risk,se");
    assert!(lines[1].starts_with("30,") && lines[2].starts_with("60,"));
}

#[test]
fn curves_are_exported() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 60, 8);
    let curves = dir.path().join("curves");
    ok(&[
        "fit",
        "--data",
        p(&data),
        "--x",
        XS,
        "--y",
        YS,
        "--lambda",
        "0.1",
        "--out",
        p(&dir.path().join("m.json")),
        "--curves",
        p(&curves),
        "--grid-size",
        "20",
    ]);
    for j in 1..=4 {
        let text = std::fs::read_to_string(curves.join(format!("curve_{j}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 21);
    }
}

fn error_line(out: &Output) -> String {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    stderr.trim_end().to_string()
}

#[test]
fn error_families_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 40, 9);
    let model = dir.path().join("m.json");

    let out = run(&[
        "fit",
        "--data",
        "/nonexistent.csv",
        "--x",
        XS,
        "--y",
        YS,
        "--out",
        p(&model),
    ]);
    assert_eq!(out.status.code(), Some(5));
    assert!(error_line(&out).starts_with("error[io]:"));

    let out = run(&[
        "fit",
        "--data",
        p(&data),
        "--x",
        "x9",
        "--y",
        YS,
        "--out",
        p(&model),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out).starts_with("error[input]:"));

    let out = run(&[
        "fit",
        "--data",
        p(&data),
        "--x",
        XS,
        "--y",
        YS,
        "--lambda",
        "-1",
        "--out",
        p(&model),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&[
        "fit",
        "--data",
        p(&data),
        "--x",
        XS,
        "--y",
        YS,
        "--penalty",
        "per-component",
        "--lambda",
        "1,2",
        "--out",
        p(&model),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let huge = dir.path().join("huge.csv");
    let mut text = std::fs::read_to_string(&data).unwrap();
    let second = text.lines().nth(1).unwrap().to_string();
    let mut cells: Vec<&str> = second.split(',').collect();
    cells[4] = "1e308";
    text = text.replacen(&second, &cells.join(","), 1);
    std::fs::write(&huge, text).unwrap();
    let out = run(&[
        "fit",
        "--data",
        p(&huge),
        "--x",
        XS,
        "--y",
        YS,
        "--lambda",
        "0.1",
        "--out",
        p(&model),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(error_line(&out).starts_with("error[numeric]:"));
    assert!(!model.exists());
}

#[test]
fn unknown_flags_and_missing_subcommand_are_rejected() {
    assert_eq!(run(&["fit", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn help_lists_flags_with_defaults() {
    let top = ok(&["--help"]);
    for sub in [
        "fit",
        "predict",
        "cv",
        "rank-path",
        "simulate",
        "risk-study",
        "certify",
    ] {
        assert!(top.contains(sub), "{sub} missing from help");
        let help = ok(&[sub, "--help"]);
        assert!(
            help.contains("--out") || help.contains("--lambda"),
            "{sub}: {help}"
        );
    }
    let fit = ok(&["fit", "--help"]);
    for flag in [
        "--penalty",
        "--lambda",
        "--lambda-scale",
        "--kernel",
        "--bandwidth",
        "--tol",
        "--max-sweeps",
        "--curves",
    ] {
        assert!(fit.contains(flag), "{flag}");
    }
    assert!(fit.contains("[default: joint]") && fit.contains("[default: 500]"));
    assert!(fit.contains("standardized covariate units"));
}
