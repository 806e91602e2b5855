use std::path::Path;
use std::process::{Command, Output};

fn edrvfl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edrvfl"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

const SMALL: &str = r#"
name = "small"
task = "synthetic_batch"
repetitions = 2
seed = 1

[network]
lambda = 0.01

[synthetic]
horizon = 30
batch_size = 3
feature_dim = 5
oracle_mean = 1.0
oracle_std = 1.0
noise_factor = 0.1
test_rows = 20
"#;

fn small_config(dir: &Path) {
    std::fs::write(dir.join("small.toml"), SMALL).unwrap();
}

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let out = edrvfl(&["presets"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["synthetic_single", "synthetic_batch", "weather_izmir_baseline", "letters_baseline"] {
        assert!(text.lines().any(|l| l == name), "{text}");
    }
}

#[test]
fn simulate_writes_both_exports_and_export_reproduces_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let out = edrvfl(&["simulate", "--config", "small.toml", "--out", "run"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("run/small-seed1.csv");
    let json = dir.path().join("run/small-seed1.json");
    assert!(csv.exists() && json.exists());

    let out = edrvfl(
        &["export", "--input", "run/small-seed1.json", "--format", "csv-long", "--out", "again"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        std::fs::read(&csv).unwrap(),
        std::fs::read(dir.path().join("again/small-seed1.csv")).unwrap()
    );
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let out = edrvfl(
        &["simulate", "--config", "small.toml", "--seed", "9", "--style", "forward", "--reps", "1", "--format", "csv-long"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("out/small-seed9.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("forward")));
    assert!(csv.lines().skip(1).all(|l| matches!(l.split(',').nth(2), Some("0") | Some(""))));
}

#[test]
fn ablate_writes_one_report_per_value() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let out = edrvfl(
        &["ablate", "--config", "small.toml", "--axis", "lambda", "--values", "0.01,1/T", "--format", "json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/small-seed1-lambda=0.01.json").exists());
    assert!(dir.path().join("out/small-seed1-lambda=1_T.json").exists());
}

#[test]
fn config_problems_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "name = \"x\"\ntask = \"synthetic_batch\"\nbogus = 1\n").unwrap();
    for args in [
        vec!["simulate", "--config", "bad.toml"],
        vec!["simulate", "--config", "missing.toml"],
        vec!["simulate", "--preset", "nope"],
        vec!["simulate"],
        vec!["simulate", "--preset", "weather_izmir_baseline"],
        vec!["bench", "--preset", "weather_izmir_baseline", "--data-dir", "nowhere"],
        vec!["simulate", "--preset", "synthetic_batch", "--style", "sideways"],
        vec!["frobnicate"],
    ] {
        let out = edrvfl(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn numerical_breakdown_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = String::from("a,b,y\n");
    for i in 0..50 {
        let s = if i % 2 == 0 { 1.0 } else { -1.3 };
        rows.push_str(&format!("{:e},{:e},{}\n", s * 1e200 * (i as f64 + 1.0), -s * 7e199 * (i as f64 + 2.0), i));
    }
    std::fs::write(dir.path().join("d.csv"), rows).unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        r#"
name = "num"
task = "regression_csv"
[network]
layers = 1
neurons = 4
activation = "relu"
lambda = 1.0
[data]
path = "d.csv"
target_columns = ["y"]
batch_fraction = 0.2
normalization = "none"
"#,
    )
    .unwrap();
    let out = edrvfl(&["bench", "--config", "c.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
