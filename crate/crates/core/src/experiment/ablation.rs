use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::ExperimentReport;
use super::runner::run_experiment_as;
use crate::error::{Error, Result};
use crate::stream::NormMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    /// Neurons per layer.
    N,
    /// Layer count.
    L,
    Lambda,
    /// Batch fraction for dataset tasks, batch size for synthetic ones.
    B,
    Normalization,
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" | "neurons" => Ok(AblationAxis::N),
            "l" | "layers" => Ok(AblationAxis::L),
            "lambda" => Ok(AblationAxis::Lambda),
            "b" | "batch" => Ok(AblationAxis::B),
            "normalization" | "norm" => Ok(AblationAxis::Normalization),
            other => Err(Error::Config(format!("unknown ablation axis {other:?}"))),
        }
    }
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::N => "N",
            AblationAxis::L => "L",
            AblationAxis::Lambda => "lambda",
            AblationAxis::B => "b",
            AblationAxis::Normalization => "normalization",
        }
    }
}

fn parse_f64(value: &str) -> Result<f64> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("expected a number, got {value:?}")))
}

fn parse_usize(value: &str) -> Result<usize> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("expected a positive integer, got {value:?}")))
}

/// `base` with `axis` set to `value`. Lambda accepts `1/T` on synthetic
/// tasks, meaning one over the horizon.
pub fn apply_axis(base: &ExperimentConfig, axis: AblationAxis, value: &str) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    match axis {
        AblationAxis::N => cfg.network.neurons = parse_usize(value)?,
        AblationAxis::L => cfg.network.layers = parse_usize(value)?,
        AblationAxis::Lambda => {
            let lambda = if value.trim().eq_ignore_ascii_case("1/t") {
                let s = cfg
                    .synthetic
                    .as_ref()
                    .ok_or_else(|| Error::Config("lambda = 1/T needs a synthetic horizon".into()))?;
                1.0 / s.horizon as f64
            } else {
                parse_f64(value)?
            };
            cfg.network.set_lambda(lambda);
        }
        AblationAxis::B => match (&mut cfg.synthetic, &mut cfg.data) {
            (Some(s), _) if cfg.task.is_synthetic() => s.batch_size = parse_usize(value)?,
            (_, Some(d)) => d.batch_fraction = parse_f64(value)?,
            _ => return Err(Error::Config("batch axis needs a data or synthetic section".into())),
        },
        AblationAxis::Normalization => {
            let d = cfg
                .data
                .as_mut()
                .filter(|_| !base.task.is_synthetic())
                .ok_or_else(|| Error::Config("normalization axis needs a dataset task".into()))?;
            d.normalization = match value.trim() {
                "zscore" => NormMethod::Zscore,
                "minmax01" => NormMethod::Minmax01,
                "none" => NormMethod::None,
                other => return Err(Error::Config(format!("unknown normalization {other:?}"))),
            };
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One report per value, all else fixed. Seeds are shared across values, so
/// the training rows of each repetition are identical along the sweep
/// (checked by the reports' data digests) except where the axis itself
/// changes the stream.
pub fn ablation_sweep(base: &ExperimentConfig, axis: AblationAxis, values: &[String]) -> Result<Vec<ExperimentReport>> {
    if values.is_empty() {
        return Err(Error::Config("ablation needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|v| apply_axis(base, axis, v).map(|c| (v.trim().to_string(), c)))
        .collect::<Result<Vec<_>>>()?;
    configs
        .par_iter()
        .map(|(value, cfg)| {
            let id = format!("{}-seed{}-{}={}", cfg.name, cfg.seed, axis.name(), sanitize(value));
            let mut report = run_experiment_as(cfg, id)?;
            report.sweep = Some((axis.name().to_string(), value.clone()));
            Ok(report)
        })
        .collect()
}

fn sanitize(value: &str) -> String {
    value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}
