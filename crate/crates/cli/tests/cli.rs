use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dualrec::distributions::RngStream;
use dualrec::{builtin_population, generate_dataset};
use dualrec_cli::{exit, run};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dualrec"));
    cmd.env_remove("DRS_SEED");
    cmd
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn table(dir: &Path, x11: u64, x10: u64, x01: u64) -> PathBuf {
    write(
        dir,
        "table.txt",
        &format!("x11 = {x11}\nx10 = {x10}\nx01 = {x01}\n"),
    )
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn cli(args: &[&str]) -> String {
    let mut argv = vec!["dualrec"];
    argv.extend_from_slice(args);
    run(argv).unwrap_or_else(|e| panic!("{args:?} failed: {e}"))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn study_field(path: &Path, field: &str) -> f64 {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == field).unwrap();
    row[i].parse().unwrap()
}

#[test]
fn closed_forms_on_a_balanced_table() {
    let dir = TempDir::new().unwrap();
    let data = table(dir.path(), 50, 50, 50);
    let out = dir.path().join("out");
    let text = cli(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--method",
        "closed-form-all",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(text.matches("200.00").count(), 3, "{text}");
    let summary = json(&out.join("summary.json"));
    for m in ["mt", "mb", "nour"] {
        assert_eq!(summary["estimates"][m].as_f64(), Some(200.0));
    }
    assert!(out.join("manifest.json").exists());
}

#[test]
fn csv_table_layout_is_accepted() {
    let dir = TempDir::new().unwrap();
    let data = write(dir.path(), "t.csv", "x01,x11,x10\n144,181,69\n");
    let text = cli(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--method",
        "mt",
    ]);
    assert!(text.contains("x11=181 x10=69 x01=144"), "{text}");
}

#[test]
fn empty_overlap_is_degenerate_data() {
    let dir = TempDir::new().unwrap();
    let data = table(dir.path(), 0, 40, 30);
    let out = bin()
        .args([
            "estimate",
            "--data",
            data.to_str().unwrap(),
            "--method",
            "ab-flat",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::DEGENERATE_DATA));
    assert!(stderr(&out).contains("x11"), "{}", stderr(&out));
}

#[test]
fn malformed_counts_are_parse_errors_with_line_numbers() {
    let dir = TempDir::new().unwrap();
    for (body, needle) in [
        ("x11 = 5\nx10 = -3\nx01 = 4\n", ":2:"),
        ("x11 = 5\nx10 = 3\nx01 = 4.5\n", ":3:"),
    ] {
        let data = write(dir.path(), "bad.txt", body);
        let out = bin()
            .args([
                "estimate",
                "--data",
                data.to_str().unwrap(),
                "--method",
                "mt",
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(exit::PARSE));
        assert!(stderr(&out).contains(needle), "{}", stderr(&out));
    }
}

#[test]
fn zero_replications_is_a_configuration_error() {
    let out = bin()
        .args(["simulate", "P1", "--method", "mt", "-R", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::CONFIG));
}

#[test]
fn conflicting_prior_flags_are_named() {
    let dir = TempDir::new().unwrap();
    let data = table(dir.path(), 20, 10, 12);
    let out = bin()
        .args([
            "estimate",
            "--data",
            data.to_str().unwrap(),
            "--n-prior",
            "poisson",
            "--lambda",
            "nour",
            "--phi-knowledge",
            "lt1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::CONFIG));
    assert!(stderr(&out).contains("--lambda nour"), "{}", stderr(&out));
}

#[test]
fn flags_override_config_which_overrides_the_environment() {
    let dir = TempDir::new().unwrap();
    let data = table(dir.path(), 20, 10, 12);
    let config = write(
        dir.path(),
        "run.conf",
        "# defaults\nchains = 3\nburnin = 40\nseed = 9\n",
    );
    let out = dir.path().join("a");
    let status = bin()
        .env("DRS_SEED", "77")
        .args([
            "estimate",
            "--data",
            data.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--chains",
            "2",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", stderr(&status));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["chains"], 2);
    assert_eq!(summary["burn_in"], 40);
    assert_eq!(summary["seed"], 9);

    let out = dir.path().join("b");
    let status = bin()
        .env("DRS_SEED", "77")
        .args([
            "estimate",
            "--data",
            data.to_str().unwrap(),
            "--burnin",
            "40",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", stderr(&status));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["seed"], 77);
    assert_eq!(summary["chains"], 5);
}

#[test]
fn replay_reproduces_every_output() {
    let dir = TempDir::new().unwrap();
    let data = table(dir.path(), 30, 12, 17);
    let first = dir.path().join("first");
    cli(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--burnin",
        "300",
        "--seed",
        "5",
        "--traces",
        "--out",
        first.to_str().unwrap(),
    ]);
    let second = dir.path().join("second");
    cli(&[
        "replay",
        "--manifest",
        first.join("manifest.json").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    let mut names: Vec<_> = fs::read_dir(&first)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n != "manifest.json")
        .collect();
    names.sort();
    assert!(names.len() >= 8, "{names:?}");
    for name in names {
        assert_eq!(
            fs::read(first.join(&name)).unwrap(),
            fs::read(second.join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
}

fn synthetic_traces(dir: &Path, drift: usize) -> Vec<PathBuf> {
    (0..4)
        .map(|j| {
            let mut rng = RngStream::new(99, j as u64);
            let mut text = String::from("iter,N,phi,p,p1dot\n");
            for i in 0..2000 {
                let offset = if i < drift {
                    (j as f64 - 1.5) * 200.0 * (1.0 - i as f64 / drift as f64)
                } else {
                    0.0
                };
                let n = (500.0 + offset + 20.0 * (rng.uniform() - 0.5)).round();
                text.push_str(&format!("{},{n},1.2,0.5,0.5\n", i + 1));
            }
            write(dir, &format!("chain{j}.csv"), &text)
        })
        .collect()
}

fn recommended_k(text: &str) -> Option<usize> {
    let line = text
        .lines()
        .find(|l| l.starts_with("recommended k:"))
        .unwrap();
    line.split_whitespace().nth(2).unwrap().parse().ok()
}

fn diagnose_files(files: &[PathBuf]) -> String {
    let mut args = vec!["diagnose", "--k-grid", "100,250,500,750,1000", "--trace"];
    args.extend(files.iter().map(|p| p.to_str().unwrap()));
    cli(&args)
}

#[test]
fn stationary_traces_need_only_the_shortest_burn_in() {
    let dir = TempDir::new().unwrap();
    let text = diagnose_files(&synthetic_traces(dir.path(), 0));
    assert_eq!(recommended_k(&text), Some(100), "{text}");
}

#[test]
fn drifting_traces_need_the_drift_discarded() {
    let dir = TempDir::new().unwrap();
    let text = diagnose_files(&synthetic_traces(dir.path(), 500));
    let k = recommended_k(&text).expect("some k passes");
    assert!(k >= 500, "{text}");
}

#[test]
fn one_chain_cannot_be_diagnosed() {
    let dir = TempDir::new().unwrap();
    let files = synthetic_traces(dir.path(), 0);
    let out = bin()
        .args(["diagnose", "--trace", files[0].to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::CONFIG));
    assert!(stderr(&out).contains("at least 2 chains"));
}

fn p3_table(dir: &Path) -> PathBuf {
    let spec = builtin_population("P3").unwrap();
    let d = generate_dataset(&spec, &mut RngStream::new(2024, 0)).unwrap();
    table(dir, d.x11, d.x10, d.x01)
}

#[test]
fn ab_flat_on_a_p3_table_covers_the_truth() {
    let dir = TempDir::new().unwrap();
    let data = p3_table(dir.path());
    let out = dir.path().join("out");
    cli(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let n = &json(&out.join("summary.json"))["n"];
    let (mean, sd) = (n["mean"].as_f64().unwrap(), n["sd"].as_f64().unwrap());
    assert!((mean - 500.0).abs() <= 3.0 * sd, "mean {mean}, sd {sd}");
}

#[test]
fn ab_con_on_a_p3_table_settles_within_the_default_burn_in() {
    let dir = TempDir::new().unwrap();
    let data = p3_table(dir.path());
    let text = cli(&[
        "diagnose",
        "--data",
        data.to_str().unwrap(),
        "--method",
        "ab-con",
    ]);
    let k = recommended_k(&text).expect("some k passes");
    assert!(k <= 7000, "{text}");
}

#[test]
fn recapture_averse_study_on_p5() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("p5");
    cli(&[
        "simulate",
        "P5",
        "--method",
        "ab-flat",
        "--phi-knowledge",
        "lt1",
        "-R",
        "50",
        "--out",
        out.to_str().unwrap(),
    ]);
    let average = study_field(&out.join("study.csv"), "average");
    assert!((470.0..=494.0).contains(&average), "average {average}");
    let reps = fs::read_to_string(out.join("replications.csv")).unwrap();
    assert_eq!(reps.lines().count(), 51);
}

#[test]
fn custom_infeasible_spec_is_named() {
    let out = bin()
        .args([
            "simulate",
            "--spec",
            "500,0.9,0.95,3",
            "--method",
            "mt",
            "-R",
            "5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::CONFIG));
    assert!(!stderr(&out).is_empty());
}
