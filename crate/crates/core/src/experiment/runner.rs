use std::time::Instant;

use log::{debug, info};
use rayon::prelude::*;

use super::config::{ExperimentConfig, Metric, Task};
use super::metrics::{five_numbers, metric_accuracy, metric_per_class_accuracy, metric_rmse};
use super::report::{ExperimentReport, RunInfo, SeriesPoint};
use crate::error::{Error, Result};
use crate::features::{classify, ensemble_predict, DirectFeatures, EdRvflNetwork, EnsembleMode, FeatureMap, LayerFeatures};
use crate::iol::{run_iol, EnsembleLearner, IolObserver, IolOptions, StepRecord, Style};
use crate::linalg::{max_abs, Mat};
use crate::regret::{ensemble_bound, forward_bound, RegretLedger};
use crate::stream::{
    generate_synthetic_rows, generate_synthetic_stream, load_csv_dataset, normalize, normalize_targets, partition_folds,
    train_test_split, Batch, BatchStream, CsvOptions, Dataset, NormMethod, StatsSource, StreamMeta, TargetKind,
};

const SEED_STREAM: u64 = 1;
const SEED_WEIGHTS: u64 = 2;
const SEED_SHUFFLE: u64 = 3;
const SEED_TEST: u64 = 4;

struct TestSet {
    x: Mat,
    y: Mat,
    labels: Option<Vec<usize>>,
}

struct Prepared {
    train: BatchStream,
    data_digest: String,
    test: Option<TestSet>,
    oracle: Option<Mat>,
    n_classes: Option<usize>,
}

/// Runs every configured style on every repetition and aggregates the
/// series across repetitions.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_as(cfg, format!("{}-seed{}", cfg.name, cfg.seed))
}

pub(crate) fn run_experiment_as(cfg: &ExperimentConfig, run_id: String) -> Result<ExperimentReport> {
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    info!("{run_id}: {} repetitions of {:?}", cfg.repetitions, cfg.styles);
    let per_rep = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(cfg, dataset.as_ref(), rep))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    let mut runs = Vec::new();
    for (p, r) in per_rep {
        points.extend(p);
        runs.extend(r);
    }
    Ok(ExperimentReport::new(run_id, cfg.clone(), points, runs))
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Option<Dataset>> {
    let Some(d) = &cfg.data else { return Ok(None) };
    if cfg.task.is_synthetic() {
        return Ok(None);
    }
    let opts = CsvOptions {
        target_columns: d.target_columns.clone(),
        target_kind: if cfg.task.is_classification() {
            TargetKind::Classification
        } else {
            TargetKind::Regression
        },
    };
    load_csv_dataset(&d.path, &opts).map(Some)
}

/// SHA-256 of the stacked rows, independent of how they are batched.
fn rows_digest(stream: &BatchStream) -> Result<String> {
    let (x, y) = stream.stacked();
    Ok(BatchStream::new(vec![Batch::new(x, y, 0)?], StreamMeta::default())?.digest())
}

fn prepare(cfg: &ExperimentConfig, dataset: Option<&Dataset>, rep: usize) -> Result<Prepared> {
    if cfg.task.is_synthetic() {
        let s = cfg.synthetic.as_ref().expect("validated");
        let scfg = s.stream_config(cfg.rep_seed(rep, SEED_STREAM));
        let (train, oracle) = generate_synthetic_stream(&scfg)?;
        let test = if s.test_rows > 0 {
            let (x, y) = generate_synthetic_rows(&scfg, &oracle, s.test_rows, cfg.rep_seed(rep, SEED_TEST))?;
            Some(TestSet { x, y, labels: None })
        } else {
            None
        };
        return Ok(Prepared {
            data_digest: rows_digest(&train)?,
            train,
            test,
            oracle: Some(oracle),
            n_classes: None,
        });
    }
    let ds = dataset.ok_or_else(|| Error::Config("dataset task without data".into()))?;
    let d = cfg.data.as_ref().expect("validated");
    let (train_rows, test_rows) = match cfg.split.folds {
        Some(f) => {
            let folds = partition_folds(ds.n_rows(), f, cfg.split.holdout_fraction, cfg.split.seed)?;
            let fold = folds[rep % f].clone();
            (fold.train, fold.test)
        }
        None => train_test_split(ds.n_rows(), cfg.split.test_fraction, cfg.split.seed)?,
    };
    let shuffle = d.shuffle.then(|| cfg.rep_seed(rep, SEED_SHUFFLE));
    let raw = ds.select(&train_rows).into_stream(d.batch_fraction, shuffle)?;
    let data_digest = rows_digest(&raw)?;
    let mut test = (!test_rows.is_empty()).then(|| {
        let t = ds.select(&test_rows);
        TestSet {
            x: t.x,
            y: t.y,
            labels: t.labels,
        }
    });
    let mut train = raw;
    if d.normalization != NormMethod::None {
        train = normalize(&train, d.normalization, StatsSource::Global)?;
        let stats = train.meta.feature_normalization.as_ref().expect("recorded");
        if let Some(t) = &mut test {
            t.x = stats.apply(&t.x);
        }
    }
    if !cfg.task.is_classification() && d.target_normalization != NormMethod::None {
        train = normalize_targets(&train, d.target_normalization, StatsSource::Global)?;
        let stats = train.meta.target_normalization.as_ref().expect("recorded");
        if let Some(t) = &mut test {
            t.y = stats.apply(&t.y);
        }
    }
    Ok(Prepared {
        train,
        data_digest,
        test,
        oracle: None,
        n_classes: ds.encoding.as_ref().map(|e| e.n_classes()),
    })
}

fn run_repetition(
    cfg: &ExperimentConfig,
    dataset: Option<&Dataset>,
    rep: usize,
) -> Result<(Vec<SeriesPoint>, Vec<RunInfo>)> {
    let prepared = prepare(cfg, dataset, rep)?;
    let k = prepared.train.feature_dim();
    let map: Box<dyn FeatureMap> = if cfg.task.is_synthetic() {
        Box::new(DirectFeatures {
            input_dim: k,
            lambda: cfg.network.resolved_lambdas()?[0],
        })
    } else {
        Box::new(EdRvflNetwork::new(cfg.network.edrvfl(cfg.rep_seed(rep, SEED_WEIGHTS))?, k)?)
    };
    let test_features = match &prepared.test {
        Some(t) => Some(map.features(&t.x)?),
        None => None,
    };
    let mut points = Vec::new();
    let mut runs = Vec::new();
    for &style in &cfg.styles {
        let (p, r) = run_style(cfg, &prepared, map.as_ref(), test_features.as_ref(), style, rep)?;
        points.extend(p);
        runs.push(r);
    }
    debug!("{}: repetition {rep} done", cfg.name);
    Ok((points, runs))
}

fn run_style(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    map: &dyn FeatureMap,
    test_features: Option<&LayerFeatures>,
    style: Style,
    rep: usize,
) -> Result<(Vec<SeriesPoint>, RunInfo)> {
    let metrics = cfg.metrics();
    let mode = cfg.ensemble_mode();
    let ledgers = if metrics.contains(&Metric::Regret) {
        let p = map.feature_dim();
        let m = prepared.train.target_dim();
        (0..map.layers())
            .map(|l| {
                let oracle = prepared.oracle.clone().filter(|o| o.shape() == (p, m));
                RegretLedger::new(style, map.lambda(l), Mat::zeros(p, m), oracle)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let mut recorder = Recorder {
        style,
        rep,
        task: cfg.task,
        metrics: &metrics,
        mode,
        test: prepared.test.as_ref().zip(test_features),
        oracle: prepared.oracle.as_ref(),
        n_classes: prepared.n_classes,
        ledgers,
        clip: cfg.iol.clip_predictions,
        y_seen: 0.0,
        points: Vec::new(),
        step_seconds: Vec::new(),
    };
    let opts = IolOptions {
        lookahead: cfg.iol.lookahead,
        beta0: None,
        max_sub_batch: cfg.iol.max_sub_batch,
        keep_snapshots: false,
        mode,
    };
    let started = Instant::now();
    let run = run_iol(map, &prepared.train, style, &opts, &mut recorder)?;
    recorder.finish(run.steps)?;
    debug!("{style} rep {rep}: {} steps in {:?}", run.steps, started.elapsed());
    Ok((
        recorder.points,
        RunInfo {
            style,
            rep,
            steps: run.steps,
            data_digest: prepared.data_digest.clone(),
            peak_resident_features: run.peak_resident_features,
            step_seconds: recorder.step_seconds,
        },
    ))
}

struct Recorder<'a> {
    style: Style,
    rep: usize,
    task: Task,
    metrics: &'a [Metric],
    mode: EnsembleMode,
    test: Option<(&'a TestSet, &'a LayerFeatures)>,
    oracle: Option<&'a Mat>,
    n_classes: Option<usize>,
    ledgers: Vec<RegretLedger>,
    clip: bool,
    y_seen: f64,
    points: Vec<SeriesPoint>,
    step_seconds: Vec<f64>,
}

impl Recorder<'_> {
    fn push(&mut self, t: usize, series: impl Into<String>, stat: &str, value: f64) {
        if value.is_finite() {
            self.points.push(SeriesPoint {
                style: self.style,
                rep: Some(self.rep),
                t,
                series: series.into(),
                stat: stat.to_string(),
                value,
            });
        }
    }

    fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }

    fn ensemble(&self, learner: &EnsembleLearner, features: &LayerFeatures) -> Result<(Vec<Mat>, Mat)> {
        let per_layer = learner.layer_predictions(features)?;
        let mut out = ensemble_predict(&per_layer, self.mode)?;
        if self.clip && !self.task.is_classification() {
            let c = self.y_seen;
            out.apply(|v| *v = v.clamp(-c, c));
        }
        Ok((per_layer, out))
    }

    fn evaluate(&mut self, learner: &EnsembleLearner, t: usize) -> Result<()> {
        if let (Some(oracle), true) = (self.oracle, self.wants(Metric::OracleDistance)) {
            let beta = &learner.layers[0].beta;
            if beta.shape() == oracle.shape() {
                self.push(t, "oracle_distance", "value", (beta - oracle).norm_squared());
            }
        }
        let Some((test, features)) = self.test else { return Ok(()) };
        let (per_layer, ens) = self.ensemble(learner, features)?;
        let layer_scores: Vec<f64>;
        let metric_name;
        if self.task.is_classification() {
            let truth = test
                .labels
                .as_ref()
                .ok_or_else(|| Error::Config("classification test set without labels".into()))?;
            let pred = classify(&ens);
            if self.wants(Metric::Accuracy) {
                self.push(t, "test_ensemble_accuracy", "value", metric_accuracy(&pred, truth)?);
            }
            if self.wants(Metric::PerClassAccuracy) {
                let n = self.n_classes.unwrap_or(ens.ncols());
                for (c, a) in metric_per_class_accuracy(&pred, truth, n)?.into_iter().enumerate() {
                    self.push(t, format!("test_class_{c}_accuracy"), "value", a);
                }
            }
            layer_scores = per_layer
                .iter()
                .map(|p| metric_accuracy(&classify(p), truth))
                .collect::<Result<_>>()?;
            metric_name = "test_layer_accuracy";
        } else {
            if self.wants(Metric::Rmse) {
                self.push(t, "test_ensemble_rmse", "value", metric_rmse(&ens, &test.y)?);
            }
            layer_scores = per_layer.iter().map(|p| metric_rmse(p, &test.y)).collect::<Result<_>>()?;
            metric_name = "test_layer_rmse";
        }
        if self.wants(Metric::LayerStats) {
            let five = five_numbers(&layer_scores).expect("at least one layer");
            for (stat, v) in ["min", "q1", "median", "q3", "max"].iter().zip(five) {
                self.push(t, metric_name, stat, v);
            }
            let mean = layer_scores.iter().sum::<f64>() / layer_scores.len() as f64;
            self.push(t, metric_name, "mean", mean);
        }
        Ok(())
    }

    fn record_regret(&mut self, step: &StepRecord<'_>, t: usize) -> Result<()> {
        let suffix = |name: &str, l: usize, layers: usize| {
            if layers == 1 {
                name.to_string()
            } else {
                format!("{name}_layer{l}")
            }
        };
        let layers = self.ledgers.len();
        for l in 0..layers {
            let lookahead = step.lookahead.map(|la| &la.d[l]);
            let row = self.ledgers[l]
                .record(
                    &step.before.layers[l],
                    &step.after.layers[l],
                    &step.features.d[l],
                    &step.batch.y,
                    lookahead,
                )?
                .clone();
            let bound_params = self.ledgers[l].bound_params(1.0)?;
            let mut vals: Vec<(&str, f64)> = vec![
                ("learner_loss", row.learner_loss),
                ("cr_offline", row.cr_offline),
                ("cr_offline_clipped", row.cr_offline_clipped),
                ("d_max", row.d_max),
                ("y_max", row.y_max),
            ];
            if let Some(v) = row.immediate_regret {
                vals.push(("ir", v));
            }
            if let Some(v) = row.cr_oracle {
                vals.push(("cr_oracle", v));
            }
            if let Some(v) = row.irt_ridge {
                vals.push(("irt_ridge", v));
            }
            if let Some(f) = row.irt_forward_post {
                vals.push(("irt_forward_term1", f.term1));
                vals.push(("irt_forward_term2", f.term2));
            }
            if let Some(f) = row.irt_forward_pre {
                vals.push(("irt_forward_term1_prev_rate", f.term1));
                vals.push(("irt_forward_term2_prev_rate", f.term2));
            }
            match self.style {
                Style::Ridge => vals.push(("bound", crate::regret::ridge_bound(&bound_params))),
                Style::Forward => {
                    let b = forward_bound(&bound_params);
                    vals.push(("bound", b.full));
                    vals.push(("bound_single_log", b.single_log));
                }
            }
            for (name, v) in vals {
                self.push(t, suffix(name, l, layers), "value", v);
            }
        }
        Ok(())
    }

    fn finish(&mut self, steps: usize) -> Result<()> {
        if self.ledgers.len() > 1 && steps > 0 {
            let params = self
                .ledgers
                .iter()
                .map(|l| l.bound_params(1.0))
                .collect::<Result<Vec<_>>>()?;
            let e = ensemble_bound(&params)?;
            let v = match self.style {
                Style::Ridge => e.ridge,
                Style::Forward => e.forward.full,
            };
            self.push(steps, "ensemble_bound", "value", v);
        }
        Ok(())
    }
}

impl IolObserver for Recorder<'_> {
    fn on_start(&mut self, learner: &EnsembleLearner) -> Result<()> {
        self.evaluate(learner, 0)
    }

    fn on_step(&mut self, step: &StepRecord<'_>) -> Result<()> {
        let t = step.t + 1;
        self.step_seconds.push(step.elapsed.as_secs_f64());
        self.y_seen = self.y_seen.max(max_abs(&step.batch.y));
        if self.wants(Metric::Train) {
            let (_, ens) = self.ensemble(step.after, step.features)?;
            if self.task.is_classification() {
                let acc = metric_accuracy(&classify(&ens), &classify(&step.batch.y))?;
                self.push(t, "train_ensemble_accuracy", "value", acc);
            } else {
                self.push(t, "train_ensemble_rmse", "value", metric_rmse(&ens, &step.batch.y)?);
            }
        }
        if !self.ledgers.is_empty() {
            self.record_regret(step, t)?;
        }
        self.evaluate(step.after, t)
    }
}
