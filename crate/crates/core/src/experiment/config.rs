//! Declarative experiment description, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Activation, EdRvflConfig, EnsembleMode, WeightInit};
use crate::iol::{LookaheadPolicy, Style};
use crate::stream::{NoiseScale, NormMethod, SyntheticConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    SyntheticSingle,
    SyntheticBatch,
    RegressionCsv,
    ClassificationCsv,
}

impl Task {
    pub fn is_synthetic(self) -> bool {
        matches!(self, Task::SyntheticSingle | Task::SyntheticBatch)
    }

    pub fn is_classification(self) -> bool {
        self == Task::ClassificationCsv
    }
}

/// Families of series an experiment records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Ensemble RMSE on the held-out set.
    Rmse,
    /// Ensemble accuracy on the held-out set.
    Accuracy,
    PerClassAccuracy,
    /// Min/quartiles/max of the sub-learners' held-out metric.
    LayerStats,
    /// Ensemble metric on each training batch right after it is learned.
    Train,
    /// Immediate and cumulative regrets, regret terms and bounds per layer.
    Regret,
    /// `|beta_t - beta_o|^2` of the first learner.
    OracleDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

fn default_layers() -> usize {
    1
}

fn default_neurons() -> usize {
    16
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_neurons")]
    pub neurons: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub weight_init: WeightInit,
    #[serde(default = "default_scale")]
    pub weight_scale: f64,
    /// Exactly one of `lambda`, `log2_inv_lambda` and `lambdas` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// `log2(1 / lambda)`, the form the baseline tables use.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log2_inv_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    /// Regression aggregation; classification always averages softmax outputs.
    #[serde(default)]
    pub ensemble: Aggregation,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            layers: default_layers(),
            neurons: default_neurons(),
            activation: Activation::default(),
            weight_init: WeightInit::default(),
            weight_scale: 1.0,
            lambda: None,
            log2_inv_lambda: None,
            lambdas: None,
            ensemble: Aggregation::default(),
        }
    }
}

impl NetworkSection {
    pub fn resolved_lambdas(&self) -> Result<Vec<f64>> {
        let given = [self.lambda.is_some(), self.log2_inv_lambda.is_some(), self.lambdas.is_some()];
        if given.iter().filter(|g| **g).count() != 1 {
            return Err(Error::Config(
                "network needs exactly one of lambda, log2_inv_lambda, lambdas".into(),
            ));
        }
        let out = match (&self.lambda, &self.log2_inv_lambda, &self.lambdas) {
            (Some(l), _, _) => vec![*l],
            (_, Some(e), _) => vec![(-e).exp2()],
            (_, _, Some(ls)) => ls.clone(),
            _ => unreachable!("checked above"),
        };
        if out.is_empty() || out.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::Config(format!("lambda values must be finite and > 0, got {out:?}")));
        }
        Ok(out)
    }

    pub fn set_lambda(&mut self, lambda: f64) {
        self.lambda = Some(lambda);
        self.log2_inv_lambda = None;
        self.lambdas = None;
    }

    pub fn edrvfl(&self, seed: u64) -> Result<EdRvflConfig> {
        let cfg = EdRvflConfig {
            layers: self.layers,
            neurons: self.neurons,
            activation: self.activation,
            weight_init: self.weight_init,
            lambdas: self.resolved_lambdas()?,
            weight_scale: self.weight_scale,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    pub target_columns: Vec<String>,
    pub batch_fraction: f64,
    /// Shuffle training rows before chunking, seeded per repetition.
    #[serde(default = "default_true")]
    pub shuffle: bool,
    #[serde(default)]
    pub normalization: NormMethod,
    /// Regression targets only.
    #[serde(default = "no_norm")]
    pub target_normalization: NormMethod,
}

fn no_norm() -> NormMethod {
    NormMethod::None
}

fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// With `folds = n`, repetition `r` tests on fold `r mod n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    /// Rows detached as a validation set before folding.
    #[serde(default)]
    pub holdout_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            test_fraction: default_test_fraction(),
            seed: 0,
            folds: None,
            holdout_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub horizon: usize,
    pub batch_size: usize,
    pub feature_dim: usize,
    pub oracle_mean: f64,
    pub oracle_std: f64,
    pub noise_factor: f64,
    #[serde(default)]
    pub noise_scale: NoiseScale,
    /// Size of a held-out test set drawn from the same model; 0 disables it.
    #[serde(default)]
    pub test_rows: usize,
}

impl SyntheticSection {
    pub fn stream_config(&self, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            horizon: self.horizon,
            batch_size: self.batch_size,
            feature_dim: self.feature_dim,
            oracle_mean: self.oracle_mean,
            oracle_std: self.oracle_std,
            noise_factor: self.noise_factor,
            noise_scale: self.noise_scale,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IolSection {
    #[serde(default)]
    pub lookahead: LookaheadPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sub_batch: Option<usize>,
    /// Clip reported regression predictions to the largest |y| seen so far.
    #[serde(default)]
    pub clip_predictions: bool,
}

fn default_styles() -> Vec<Style> {
    vec![Style::Ridge, Style::Forward]
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: Task,
    #[serde(default = "default_styles")]
    pub styles: Vec<Style>,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Empty selects the task's defaults.
    #[serde(default)]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub iol: IolSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; a relative data path is taken relative to the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(d) = &mut self.data {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
    }

    pub fn metrics(&self) -> Vec<Metric> {
        if !self.metrics.is_empty() {
            let mut m = self.metrics.clone();
            m.sort();
            m.dedup();
            return m;
        }
        match self.task {
            Task::SyntheticSingle | Task::SyntheticBatch => {
                let mut m = vec![Metric::Train, Metric::Regret, Metric::OracleDistance];
                if self.synthetic.as_ref().is_some_and(|s| s.test_rows > 0) {
                    m.push(Metric::Rmse);
                }
                m.sort();
                m
            }
            Task::RegressionCsv => vec![Metric::Rmse, Metric::LayerStats, Metric::Train],
            Task::ClassificationCsv => vec![
                Metric::Accuracy,
                Metric::PerClassAccuracy,
                Metric::LayerStats,
                Metric::Train,
            ],
        }
    }

    pub fn ensemble_mode(&self) -> EnsembleMode {
        match (self.task.is_classification(), self.network.ensemble) {
            (true, _) => EnsembleMode::ClassificationSoftmaxMean,
            (false, Aggregation::Mean) => EnsembleMode::RegressionMean,
            (false, Aggregation::Median) => EnsembleMode::RegressionMedian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("experiment name is empty".into()));
        }
        if self.name.contains(['/', '\\']) {
            return Err(Error::Config("experiment name must not contain path separators".into()));
        }
        if self.styles.is_empty() {
            return Err(Error::Config("at least one style is required".into()));
        }
        let mut styles = self.styles.clone();
        styles.dedup();
        if styles.len() != self.styles.len() {
            return Err(Error::Config("styles are listed twice".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if self.iol.max_sub_batch == Some(0) {
            return Err(Error::Config("max_sub_batch must be >= 1".into()));
        }
        self.network.edrvfl(0)?;
        let synthetic = self.task.is_synthetic();
        for m in self.metrics() {
            let ok = match m {
                Metric::Accuracy | Metric::PerClassAccuracy => self.task.is_classification(),
                Metric::Rmse => !self.task.is_classification(),
                Metric::OracleDistance => synthetic,
                Metric::Regret | Metric::Train | Metric::LayerStats => true,
            };
            if !ok {
                return Err(Error::Config(format!("metric {m:?} does not apply to task {:?}", self.task)));
            }
        }
        if synthetic {
            let s = self
                .synthetic
                .as_ref()
                .ok_or_else(|| Error::Config("synthetic task needs a [synthetic] section".into()))?;
            s.stream_config(0).validate()?;
            if self.task == Task::SyntheticSingle && s.batch_size != 1 {
                return Err(Error::Config("synthetic_single needs batch_size = 1".into()));
            }
            if self.network.resolved_lambdas()?.len() != 1 {
                return Err(Error::Config("synthetic tasks use one learner and a single lambda".into()));
            }
            if self.metrics().contains(&Metric::Rmse) && s.test_rows == 0 {
                return Err(Error::Config("rmse on a synthetic task needs synthetic.test_rows > 0".into()));
            }
        } else {
            let d = self
                .data
                .as_ref()
                .ok_or_else(|| Error::Config("dataset task needs a [data] section".into()))?;
            if !(d.batch_fraction > 0.0 && d.batch_fraction <= 1.0) {
                return Err(Error::Config(format!("batch_fraction must lie in (0, 1], got {}", d.batch_fraction)));
            }
            if d.target_columns.is_empty() {
                return Err(Error::Config("data.target_columns is empty".into()));
            }
            if self.task.is_classification() && d.target_columns.len() != 1 {
                return Err(Error::Config("classification takes exactly one label column".into()));
            }
            if !d.path.is_file() {
                return Err(Error::Config(format!("data file {} does not exist", d.path.display())));
            }
            if !(0.0..1.0).contains(&self.split.test_fraction) {
                return Err(Error::Config("split.test_fraction must lie in [0, 1)".into()));
            }
            if let Some(f) = self.split.folds {
                if f < 2 {
                    return Err(Error::Config("split.folds must be >= 2".into()));
                }
            }
        }
        Ok(())
    }

    /// `lookahead` seeds and every other seed derive from `seed`, so two
    /// configs differing only in an ablated value see identical streams.
    pub fn rep_seed(&self, rep: usize, purpose: u64) -> u64 {
        mix(mix(self.seed ^ purpose.wrapping_mul(0xD1B5_4A32_D192_ED03)) ^ rep as u64)
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "tiny"
task = "synthetic_batch"
[network]
lambda = 0.5
[synthetic]
horizon = 5
batch_size = 2
feature_dim = 3
oracle_mean = 1.0
oracle_std = 0.5
noise_factor = 0.1
"#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.styles, vec![Style::Ridge, Style::Forward]);
        assert_eq!(cfg.repetitions, 1);
        assert!(cfg.metrics().contains(&Metric::Regret));
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn lambda_forms() {
        let mut n = NetworkSection {
            log2_inv_lambda: Some(-4.0),
            ..Default::default()
        };
        assert_eq!(n.resolved_lambdas().unwrap(), vec![16.0]);
        n.log2_inv_lambda = Some(5.0);
        assert_eq!(n.resolved_lambdas().unwrap(), vec![1.0 / 32.0]);
        n.lambda = Some(1.0);
        assert!(n.resolved_lambdas().is_err());
        assert!(NetworkSection::default().resolved_lambdas().is_err());
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let bad = [
            MINIMAL.replace("task = \"synthetic_batch\"", "task = \"synthetic_single\""),
            MINIMAL.replace("name = \"tiny\"", "name = \"tiny\"\nrepetitions = 0"),
            MINIMAL.replace("name = \"tiny\"", "name = \"tiny\"\nstyles = []"),
            MINIMAL.replace("name = \"tiny\"", "name = \"tiny\"\nmetrics = [\"accuracy\"]"),
            MINIMAL.replace("lambda = 0.5", "lambda = -1.0"),
        ];
        for text in bad {
            let err = ExperimentConfig::from_toml(&text).and_then(|c| c.validate()).unwrap_err();
            assert!(err.is_config(), "{err}");
        }
        assert!(ExperimentConfig::from_toml("name = 1").unwrap_err().is_config());
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}\nbogus = 1")).is_err());
    }

    #[test]
    fn missing_data_file_fails_validation() {
        let text = r#"
name = "csv"
task = "regression_csv"
[network]
lambda = 1.0
[data]
path = "/nonexistent/file.csv"
target_columns = ["y"]
batch_fraction = 0.1
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rep_seeds_are_distinct() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_ne!(cfg.rep_seed(0, 1), cfg.rep_seed(1, 1));
        assert_ne!(cfg.rep_seed(0, 1), cfg.rep_seed(0, 2));
        assert_eq!(cfg.rep_seed(3, 1), cfg.rep_seed(3, 1));
    }
}
