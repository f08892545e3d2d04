use std::fs;
use std::path::Path;
use std::process::Command;

use seqdescent_cli::run_from_args;

fn run(args: &[&str]) -> (u8, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["seqdescent"];
    full.extend_from_slice(args);
    let code = run_from_args(full, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn solve_example1_wide_writes_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out, _) = run(&[
        "solve",
        "--objective",
        "example1-wide",
        "--start",
        "-1,3",
        "--out-dir",
        d,
    ]);
    assert_eq!(code, 0, "{out}");

    let json: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("example1-wide-report.json")).unwrap(),
    )
    .unwrap();
    let minima: Vec<f64> = json["minima"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["f"].as_f64().unwrap())
        .collect();
    assert_eq!(minima.len(), 2);
    assert!((minima[0] + 5.1300).abs() <= 1e-3);
    assert!((minima[1] + 17.4022).abs() <= 1e-3);

    let (header, rows) = read_csv(&dir.path().join("example1-wide-trace.csv"));
    assert_eq!(header[..2], ["search", "iter"]);
    assert!(rows.iter().any(|r| r[0] == "1"));
    let (header, rows) = read_csv(&dir.path().join("example1-wide-iterations.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(header[column(&header, "k")], "k");
}

#[test]
fn solve_shubert_penalized_from_seven_seven() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out, _) = run(&[
        "solve",
        "--objective",
        "shubert-penalized",
        "--start",
        "7,7",
        "--out-dir",
        d,
    ]);
    assert_eq!(code, 0);
    let best = out.lines().find(|l| l.starts_with("best")).unwrap();
    let f: f64 = best.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!((f + 186.7309).abs() <= 1e-2, "{best}");
}

#[test]
fn unknown_objective_is_a_usage_error() {
    let (code, _, err) = run(&["solve", "--objective", "nosuch"]);
    assert_eq!(code, 2);
    assert!(err.contains("nosuch"));
    assert_eq!(run(&["solve"]).0, 2);
    assert_eq!(
        run(&["solve", "--objective", "sphere", "--start", "1,x"]).0,
        2
    );
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["bench", "--case", "nosuch"]).0, 2);
    assert_eq!(
        run(&[
            "solve",
            "--objective",
            "sphere",
            "--levelset-box",
            "-9,9,-9,9"
        ])
        .0,
        2
    );
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "objective = \"sphere\"\nstart = [1.0, 2.0]\nseed = 3\nformat = \"jsonl\"\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let (code, out, err) = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--start",
        "-2,0.5",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("start         (-2, 0.5)"), "{out}");
    let text = fs::read_to_string(out_dir.join("sphere-iterations.jsonl")).unwrap();
    let row: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(row["k"], 0);

    fs::write(&cfg, "objectiv = \"sphere\"\n").unwrap();
    assert_eq!(run(&["solve", "--config", cfg.to_str().unwrap()]).0, 2);
}

#[test]
fn levelset_dump_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, _, _) = run(&[
        "levelset-dump",
        "--objective",
        "example1",
        "--level",
        "-5.1300",
        "--out-dir",
        d,
    ]);
    assert_eq!(code, 0);
    let (header, rows) = read_csv(&dir.path().join("example1-levelset.csv"));
    assert_eq!(header, ["x1", "x2", "f", "g1", "g2", "grad_norm"]);
    assert!(!rows.is_empty());
    for row in &rows {
        let f: f64 = row[2].parse().unwrap();
        assert!((f + 5.1300).abs() <= 1e-6, "{f}");
    }
}

#[test]
fn levelset_dump_below_the_minimum_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, _, _) = run(&[
        "levelset-dump",
        "--objective",
        "sphere",
        "--level",
        "-1",
        "--out-dir",
        d,
    ]);
    assert_eq!(code, 0);
    let (header, rows) = read_csv(&dir.path().join("sphere-levelset.csv"));
    assert_eq!(header.len(), 6);
    assert!(rows.is_empty());
}

#[test]
fn levelset_dump_at_the_penalized_shubert_minimum_is_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, _, _) = run(&[
        "levelset-dump",
        "--objective",
        "shubert-penalized",
        "--level",
        "-186.7309",
        "--out-dir",
        d,
    ]);
    assert_eq!(code, 0);
    let (header, rows) = read_csv(&dir.path().join("shubert-penalized-levelset.csv"));
    let g = column(&header, "grad_norm");
    for row in rows {
        assert!(row[g].parse::<f64>().unwrap() <= 1e-4);
    }
}

#[test]
fn levelset_dump_at_minimum_of() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out, _) = run(&[
        "levelset-dump",
        "--objective",
        "example1",
        "--at-minimum-of",
        "-1,3",
        "--out-dir",
        d,
    ]);
    assert_eq!(code, 0);
    let level: f64 = out
        .lines()
        .next()
        .unwrap()
        .split_whitespace()
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((level + 5.1300).abs() <= 1e-3);
    assert_eq!(run(&["levelset-dump", "--objective", "example1"]).0, 2);
}

#[test]
fn bench_example1_wide_passes_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out, _) = run(&["bench", "--case", "example1-wide", "--out-dir", d]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("[paper] ok"));
    let (header, rows) = read_csv(&dir.path().join("bench-summary.csv"));
    assert_eq!(header.last().unwrap(), "wall_time_s");
    assert_eq!(rows.len(), 1);
    let (header, rows) = read_csv(&dir.path().join("bench-checks.csv"));
    let p = column(&header, "provenance");
    assert!(rows
        .iter()
        .all(|r| r[p] == "paper" || r[p] == "derived-oracle"));
    assert!(dir.path().join("bench-example1-wide.csv").exists());
}

#[test]
fn bench_expectation_failure_exits_one() {
    // One outer iteration cannot find the second minimum.
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out, _) = run(&[
        "bench",
        "--case",
        "example1-wide",
        "--max-outer",
        "1",
        "--out-dir",
        d,
    ]);
    assert_eq!(code, 1);
    assert!(out.contains("failed expectations:"));
}

#[test]
fn grad_check_and_oracle() {
    let (code, out, _) = run(&["grad-check", "--objective", "example1", "--samples", "1000"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("pass"));
    let (code, _, _) = run(&[
        "grad-check",
        "--objective",
        "sphere",
        "--samples",
        "0",
        "--point",
        "-1,2",
    ]);
    assert_eq!(code, 0);

    let (code, out, _) = run(&["oracle", "--objective", "example1", "--resolution", "400"]);
    assert_eq!(code, 0);
    let line = out.lines().find(|l| l.starts_with("polished")).unwrap();
    let f: f64 = line.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!((f + 8.1048).abs() <= 1e-3, "{line}");
}

#[test]
fn binary_exit_codes_and_env_out_dir() {
    let exe = env!("CARGO_BIN_EXE_seqdescent");
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(exe)
        .args(["solve", "--objective", "sphere", "--seed", "5"])
        .env("SEQDESCENT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(dir.path().join("sphere-report.json").exists());

    let status = Command::new(exe)
        .args(["solve", "--objective", "nosuch"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let status = Command::new(exe).arg("--help").output().unwrap();
    assert_eq!(status.status.code(), Some(0));
}
