use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sde_core::io::{read_matrix, write_matrix, MatrixFormat};
use sde_core::rng::{gaussian_matrix, random_orthogonal};
use sde_core::{FeatureMatrix, RngState};
use serde_json::Value;
use tempfile::TempDir;

fn sde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sde")).args(args).output().unwrap()
}

fn sde_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sde")).args(args).env(key, value).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn planted_file(dir: &Path, name: &str) -> PathBuf {
    let mut rng = RngState::new(4);
    let mut f: FeatureMatrix = gaussian_matrix(&mut rng, 100, 400, 1.0).unwrap();
    let u = random_orthogonal::<f64>(&mut rng, 100).unwrap().leading_columns(5);
    let v = random_orthogonal::<f64>(&mut rng, 400).unwrap().leading_columns(5);
    f.axpy(100.0, &u.matmul_t(&v).unwrap()).unwrap();
    let path = dir.join(name);
    write_matrix(&path, &f, MatrixFormat::Csv).unwrap();
    path
}

#[test]
fn analyze_reports_planted_rank() {
    let dir = TempDir::new().unwrap();
    let input = planted_file(dir.path(), "f.csv");
    let out = dir.path().join("out");
    let o = sde(&["analyze", s(&input), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let part = json(out.join("partition.json"));
    let signal = part["strong"].as_array().unwrap().len() + part["weak"].as_array().unwrap().len();
    assert_eq!(signal, 5);
    let manifest = json(out.join("manifest.json"));
    assert_eq!(manifest["command"], "analyze");
    let artifacts: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|a| a.as_str().unwrap()).collect();
    assert_eq!(artifacts, ["spectrum.csv", "partition.json", "cumulative_energy.csv", "analysis.svg"]);
    let spectrum = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().next(), Some("index,sigma"));
    assert_eq!(spectrum.lines().count(), 101);
    let svg = fs::read_to_string(out.join("analysis.svg")).unwrap();
    assert_eq!(svg.matches("<g transform").count(), 3);
}

#[test]
fn zero_matrix_is_bad_input() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("z.csv");
    write_matrix(&input, &FeatureMatrix::zeros(3, 4), MatrixFormat::Binary).unwrap();
    let o = sde(&["analyze", s(&input), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn io_errors_carry_an_offset() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("m.bin");
    write_matrix(&input, &FeatureMatrix::identity(3), MatrixFormat::Binary).unwrap();
    let bytes = fs::read(&input).unwrap();
    fs::write(&input, &bytes[..bytes.len() - 3]).unwrap();
    let o = sde(&["analyze", s(&input), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("byte offset"));
}

#[test]
fn zero_alpha_returns_the_input() {
    let dir = TempDir::new().unwrap();
    let input = planted_file(dir.path(), "f.csv");
    let out = dir.path().join("out");
    assert_eq!(code(&sde(&["enhance", s(&input), "--alpha", "0", "--out", s(&out)])), 0);
    let f = read_matrix(&input).unwrap();
    let g = read_matrix(&out.join("enhanced.csv")).unwrap();
    assert!(g.sub(&f).unwrap().frobenius_norm() <= 1e-9 * f.frobenius_norm());
}

#[test]
fn schedule_start_logs_zero_alpha() {
    let dir = TempDir::new().unwrap();
    let input = planted_file(dir.path(), "f.csv");
    let out = dir.path().join("out");
    let args = ["enhance", s(&input), "--step", "0", "--total-steps", "100", "--batch-size", "256", "--out", s(&out)];
    assert_eq!(code(&sde(&args)), 0);
    let delta = json(out.join("delta.json"));
    assert_eq!(delta["alpha"], 0.0);
    assert!(delta["deltas"].as_array().unwrap().iter().all(|d| d.as_f64() == Some(0.0)));
}

#[test]
fn delta_seed_replays_enhancement() {
    let dir = TempDir::new().unwrap();
    let input = planted_file(dir.path(), "f.csv");
    let first = dir.path().join("a");
    assert_eq!(code(&sde(&["enhance", s(&input), "--alpha", "0.7", "--seed", "31", "--format", "bin", "--out", s(&first)])), 0);
    let seed = json(first.join("delta.json"))["seed"].as_u64().unwrap();
    let second = dir.path().join("b");
    let seed = seed.to_string();
    assert_eq!(code(&sde(&["enhance", s(&input), "--alpha", "0.7", "--seed", &seed, "--format", "bin", "--out", s(&second)])), 0);
    assert_eq!(fs::read(first.join("enhanced.bin")).unwrap(), fs::read(second.join("enhanced.bin")).unwrap());
    // the CSV rendering of the same run parses back to the same bits
    let third = dir.path().join("c");
    assert_eq!(code(&sde(&["enhance", s(&input), "--alpha", "0.7", "--seed", &seed, "--out", s(&third)])), 0);
    assert_eq!(read_matrix(&third.join("enhanced.csv")).unwrap(), read_matrix(&first.join("enhanced.bin")).unwrap());
}

#[test]
fn enhance_needs_exactly_one_alpha_source() {
    let dir = TempDir::new().unwrap();
    let input = planted_file(dir.path(), "f.csv");
    let o = sde(&["enhance", s(&input), "--alpha", "0.1", "--step", "3", "--total-steps", "9", "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("enhance.alpha"));
}

#[test]
fn schedules_end_at_lambda_floor() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&sde(&["schedules", "--total-steps", "1000", "--batch-size", "256", "--out", s(&out)])), 0);
    let csv = fs::read_to_string(out.join("schedules.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,alpha,lambda"));
    assert_eq!(csv.lines().count(), 1002);
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0], "1000");
    assert_eq!(last[2].parse::<f64>().unwrap(), 0.03);
    assert!(out.join("schedules.svg").exists());
}

#[test]
fn gradcheck_passes_on_default_seed() {
    let dir = TempDir::new().unwrap();
    let o = sde(&["gradcheck", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(dir.path().join("gradcheck.json"))["pass"], true);
    assert_eq!(json(dir.path().join("manifest.json"))["seed"], 0);
}

const SMALL: [&str; 10] =
    ["--pairs", "96", "--ambient-dim", "24", "--total-steps", "30", "--batch-size", "8", "--embed-dim", "12"];

fn results_row(dir: &Path) -> Vec<String> {
    let csv = fs::read_to_string(dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("mode,seed,clean_p1,perturbed_p1,final_feat,final_spec"));
    csv.lines().nth(1).unwrap().split(',').map(str::to_string).collect()
}

#[test]
fn degenerate_overrides_match_infonce_baseline() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let mut sde_args = vec!["train", "--seed", "3", "--alpha-override", "0", "--lambda-override", "0", "--out", s(&a)];
    sde_args.extend(SMALL);
    let mut base_args = vec!["train", "--seed", "3", "--mode", "infonce_only", "--out", s(&b)];
    base_args.extend(SMALL);
    assert_eq!(code(&sde(&sde_args)), 0);
    assert_eq!(code(&sde(&base_args)), 0);
    let (ra, rb) = (results_row(&a), results_row(&b));
    assert_eq!(ra[0], "sde");
    assert_eq!(rb[0], "infonce_only");
    assert_eq!(ra[1..], rb[1..]);
    assert_eq!(fs::read_to_string(a.join("train_log.jsonl")).unwrap().lines().count(), 30);
}

#[test]
fn flags_override_config_values() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"seed": 5, "task": {"pairs": 96, "ambient_dim": 24}, "train": {"total_steps": 3, "batch_size": 8, "embed_dim": 6}}"#).unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&sde(&["train", "--config", s(&cfg), "--total-steps", "4", "--out", s(&out)])), 0);
    let m = json(out.join("manifest.json"));
    assert_eq!(m["config"]["train"]["total_steps"], 4);
    assert_eq!(m["config"]["train"]["embed_dim"], 6);
    assert_eq!(m["config"]["train"]["seed"], 5);
    assert_eq!(m["seed"], 5);
    assert_eq!(fs::read_to_string(out.join("train_log.jsonl")).unwrap().lines().count(), 4);
    assert!(out.join("w_x.csv").exists() && out.join("w_y.csv").exists());
}

#[test]
fn malformed_config_names_the_key() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"train": {"mode": "fast"}}"#).unwrap();
    let o = sde(&["train", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.mode"));
    let o = sde(&["train", "--config", s(&dir.path().join("nope.json")), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("io error"));
}

#[test]
fn invalid_values_are_bad_input() {
    let dir = TempDir::new().unwrap();
    let o = sde(&["train", "--learning-rate=-1", "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.learning_rate"));
    assert_eq!(code(&sde(&["schedules", "--total-steps", "0", "--out", s(dir.path())])), 2);
    assert_eq!(code(&sde(&["bogus"])), 2);
}

#[test]
fn divergent_training_is_a_numeric_failure() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["train", "--learning-rate", "1e200", "--out", s(dir.path())];
    args.extend(SMALL);
    let o = sde(&args);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn ablation_order_does_not_depend_on_workers() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let grid = ["--modes", "sde,infonce_only,weak_only", "--seeds", "1,2"];
    let mut one = vec!["ablate", "--out", s(&a)];
    one.extend(SMALL);
    one.extend(grid);
    let mut many = vec!["ablate", "--out", s(&b)];
    many.extend(SMALL);
    many.extend(grid);
    assert_eq!(code(&sde_env(&one, "SDE_WORKERS", "1")), 0);
    assert_eq!(code(&sde_env(&many, "SDE_WORKERS", "3")), 0);
    let csv = fs::read_to_string(a.join("ablation.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(b.join("ablation.csv")).unwrap());
    let modes: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(modes, ["sde", "sde", "infonce_only", "infonce_only", "weak_only", "weak_only"]);
    let doc = json(a.join("ablation.json"));
    assert_eq!(doc["summary"].as_array().unwrap().len(), 3);
    assert_eq!(code(&sde_env(&one, "SDE_WORKERS", "zero")), 2);
}
