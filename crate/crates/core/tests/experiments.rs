use std::path::Path;

use edrvfl_iol::experiment::{
    ablation_sweep, export_report, preset, preset_names, run_experiment, AblationAxis, ExperimentConfig,
    ExperimentReport, ExportFormat, CSV_HEADER,
};
use edrvfl_iol::stream::rng_from_seed;
use edrvfl_iol::Style;
use rand::Rng;
use rand_distr::StandardNormal;

fn small_synthetic() -> ExperimentConfig {
    ExperimentConfig::from_toml(
        r#"
name = "small"
task = "synthetic_batch"
repetitions = 3
seed = 5

[network]
lambda = 0.01

[synthetic]
horizon = 40
batch_size = 4
feature_dim = 6
oracle_mean = 2.0
oracle_std = 1.0
noise_factor = 0.1
test_rows = 50
"#,
    )
    .unwrap()
}

fn write_regression_fixture(dir: &Path) {
    let mut rng = rng_from_seed(3);
    let mut w = csv::Writer::from_path(dir.join("weather_izmir.csv")).unwrap();
    w.write_record(["a", "b", "c", "Mean_temperature"]).unwrap();
    for _ in 0..300 {
        let x: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let y = 10.0 + 3.0 * x[0] - 2.0 * x[1] * x[2] + 0.1 * rng.sample::<f64, _>(StandardNormal);
        w.write_record(x.iter().chain([&y]).map(|v| format!("{v:.4}"))).unwrap();
    }
    w.flush().unwrap();
}

fn write_classification_fixture(dir: &Path) {
    let mut rng = rng_from_seed(4);
    let mut w = csv::Writer::from_path(dir.join("letters.csv")).unwrap();
    let mut header: Vec<String> = (0..16).map(|j| format!("f{j}")).collect();
    header.push("letter".into());
    w.write_record(&header).unwrap();
    for i in 0..1300 {
        let class = i % 26;
        let mut row: Vec<String> = (0..16)
            .map(|j| {
                let centre = ((class * 7 + j * 3) % 16) as f64;
                format!("{:.3}", centre + 1.5 * rng.sample::<f64, _>(StandardNormal))
            })
            .collect();
        row.push(class.to_string());
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
}

#[test]
fn equal_seeds_give_identical_exports() {
    let cfg = small_synthetic();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(a.to_csv_string().unwrap(), run_experiment(&other).unwrap().to_csv_string().unwrap());
}

#[test]
fn exported_json_round_trips_bit_exactly() {
    let report = run_experiment(&small_synthetic()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = export_report(&report, dir.path(), &[ExportFormat::CsvLong, ExportFormat::Json]).unwrap();
    assert_eq!(paths.len(), 2);
    let back = ExperimentReport::load(&paths[1]).unwrap();
    assert_eq!(back, report);
    for (a, b) in back.points.iter().zip(&report.points) {
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
    assert_eq!(back.config, small_synthetic());
    assert_eq!(back.library_version, env!("CARGO_PKG_VERSION"));

    let csv = std::fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(csv.lines().count(), report.points.len() + 1);
}

#[test]
fn report_without_points_exports_header_only() {
    let report = ExperimentReport::new("empty".into(), small_synthetic(), Vec::new(), Vec::new());
    assert_eq!(report.to_csv_string().unwrap(), format!("{}\n", CSV_HEADER.join(",")));
}

#[test]
fn export_to_unwritable_path_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let report = ExperimentReport::new("r".into(), small_synthetic(), Vec::new(), Vec::new());
    let err = export_report(&report, blocker.join("sub"), &[ExportFormat::Json]).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}

#[test]
fn single_value_sweep_matches_plain_run() {
    let cfg = small_synthetic();
    let sweep = ablation_sweep(&cfg, AblationAxis::Lambda, &["0.01".to_string()]).unwrap();
    assert_eq!(sweep.len(), 1);
    let plain = run_experiment(&cfg).unwrap();
    assert_eq!(sweep[0].points, plain.points);
    assert_eq!(sweep[0].sweep, Some(("lambda".to_string(), "0.01".to_string())));
}

#[test]
fn lambda_sweep_shares_streams_across_values() {
    let values: Vec<String> = ["0.005", "0.01", "0.02", "1/T"].iter().map(|s| s.to_string()).collect();
    let sweep = ablation_sweep(&small_synthetic(), AblationAxis::Lambda, &values).unwrap();
    assert_eq!(sweep.len(), 4);
    let digests = |r: &ExperimentReport| r.runs.iter().map(|i| i.data_digest.clone()).collect::<Vec<_>>();
    for r in &sweep[1..] {
        assert_eq!(digests(r), digests(&sweep[0]));
    }
    assert_eq!(sweep[3].config.network.resolved_lambdas().unwrap(), vec![1.0 / 40.0]);
}

#[test]
fn normalization_sweep_on_classification_is_paired() {
    let dir = tempfile::tempdir().unwrap();
    write_classification_fixture(dir.path());
    let mut cfg = preset("letters_baseline", dir.path()).unwrap();
    cfg.repetitions = 1;
    cfg.network.neurons = 40;
    let values = vec!["zscore".to_string(), "minmax01".to_string()];
    let sweep = ablation_sweep(&cfg, AblationAxis::Normalization, &values).unwrap();
    assert_eq!(sweep.len(), 2);
    assert_eq!(sweep[0].runs[0].data_digest, sweep[1].runs[0].data_digest);
    assert_ne!(sweep[0].run_id, sweep[1].run_id);
    let n_class = sweep[0]
        .series_names()
        .iter()
        .filter(|s| s.starts_with("test_class_") && s.ends_with("_accuracy"))
        .count();
    assert_eq!(n_class, 26);
}

#[test]
fn runner_holds_at_most_one_lookahead_batch() {
    let report = run_experiment(&small_synthetic()).unwrap();
    for run in &report.runs {
        let limit = match run.style {
            Style::Ridge => 1,
            Style::Forward => 2,
        };
        assert!(run.peak_resident_features <= limit, "{run:?}");
    }
}

fn final_beats_start(report: &ExperimentReport, series: &str, lower_is_better: bool) {
    for style in &report.config.styles {
        let curve = report.curve(*style, series, "mean");
        let (start, end) = (curve.first().unwrap().1, curve.last().unwrap().1);
        assert_eq!(curve.first().unwrap().0, 0);
        let better = if lower_is_better { end < start } else { end > start };
        assert!(better, "{} {style} {series}: {start} -> {end}", report.run_id);
    }
}

#[test]
fn every_preset_improves_on_its_starting_point() {
    let dir = tempfile::tempdir().unwrap();
    write_regression_fixture(dir.path());
    write_classification_fixture(dir.path());
    for name in preset_names() {
        let mut cfg = preset(name, dir.path()).unwrap();
        cfg.repetitions = 2;
        if let Some(s) = &mut cfg.synthetic {
            s.horizon = 200;
        }
        let report = run_experiment(&cfg).unwrap();
        if cfg.task.is_classification() {
            final_beats_start(&report, "test_ensemble_accuracy", false);
        } else {
            final_beats_start(&report, "test_ensemble_rmse", true);
        }
    }
}

#[test]
fn missing_dataset_is_a_config_error() {
    let cfg = preset("weather_izmir_baseline", "/nonexistent").unwrap();
    assert!(run_experiment(&cfg).unwrap_err().is_config());
}
