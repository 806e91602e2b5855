//! Frozen random feature cascade of the ensemble deep RVFL network and the
//! aggregation of per-layer predictions.
//!
//! Layer 1 computes `H1 = g(X W1)`, layer `l > 1` computes
//! `Hl = g([H(l-1) | X] Wl)`, and every sub-learner reads `Dl = [Hl | X]`.
//! There are no biases. Hidden weights never change after construction.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hstack, MatrixRecord, Mat};
use crate::stream::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Sigmoid,
    Relu,
    /// `x * sigmoid(x)`.
    Swish,
    Tanh,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(v),
            Activation::Relu => v.max(0.0),
            Activation::Swish => v * sigmoid(v),
            Activation::Tanh => v.tanh(),
        }
    }

    pub const ALL: [Activation; 4] = [
        Activation::Sigmoid,
        Activation::Relu,
        Activation::Swish,
        Activation::Tanh,
    ];
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Hidden weight initialisation. All schemes draw from a zero-mean normal:
/// `standard_normal` with unit std, `xavier` with std `sqrt(2 / (fan_in + fan_out))`
/// and `kaiming` with std `sqrt(2 / fan_in)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    #[default]
    StandardNormal,
    Xavier,
    Kaiming,
}

impl WeightInit {
    fn std(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            WeightInit::StandardNormal => 1.0,
            WeightInit::Xavier => (2.0 / (fan_in + fan_out) as f64).sqrt(),
            WeightInit::Kaiming => (2.0 / fan_in as f64).sqrt(),
        }
    }
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdRvflConfig {
    pub layers: usize,
    pub neurons: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub weight_init: WeightInit,
    /// One regularization factor per layer, or a single shared value.
    pub lambdas: Vec<f64>,
    /// Uniform multiplier on the hidden weights.
    #[serde(default = "default_scale")]
    pub weight_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

impl EdRvflConfig {
    pub fn new(layers: usize, neurons: usize, activation: Activation, lambda: f64, seed: u64) -> Self {
        EdRvflConfig {
            layers,
            neurons,
            activation,
            weight_init: WeightInit::StandardNormal,
            lambdas: vec![lambda],
            weight_scale: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.neurons == 0 {
            return Err(Error::Config("layers and neurons must be >= 1".into()));
        }
        if self.lambdas.len() != 1 && self.lambdas.len() != self.layers {
            return Err(Error::Config(format!(
                "expected 1 or {} lambdas, got {}",
                self.layers,
                self.lambdas.len()
            )));
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::Config("every lambda must be finite and > 0".into()));
        }
        if !(self.weight_scale > 0.0) || !self.weight_scale.is_finite() {
            return Err(Error::Config("weight_scale must be finite and > 0".into()));
        }
        Ok(())
    }

    /// Regularization factor of layer `l` (0-based).
    pub fn lambda(&self, l: usize) -> f64 {
        if self.lambdas.len() == 1 {
            self.lambdas[0]
        } else {
            self.lambdas[l]
        }
    }
}

/// `w1` is `k x N`; `hidden[i]` is `(N + k) x N` for layers 2..L.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWeights {
    pub seed: u64,
    pub init: WeightInit,
    pub scale: f64,
    pub input_dim: usize,
    pub neurons: usize,
    pub w1: Mat,
    pub hidden: Vec<Mat>,
}

pub fn init_random_weights(cfg: &EdRvflConfig, input_dim: usize) -> Result<RandomWeights> {
    cfg.validate()?;
    if input_dim == 0 {
        return Err(Error::Config("input dimension must be >= 1".into()));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let n = cfg.neurons;
    let mut draw = |rows: usize| -> Mat {
        let std = cfg.weight_init.std(rows, n) * cfg.weight_scale;
        let dist = Normal::new(0.0, std).expect("positive std");
        Mat::from_fn(rows, n, |_, _| dist.sample(&mut rng))
    };
    let w1 = draw(input_dim);
    let hidden = (1..cfg.layers).map(|_| draw(input_dim + n)).collect();
    Ok(RandomWeights {
        seed: cfg.seed,
        init: cfg.weight_init,
        scale: cfg.weight_scale,
        input_dim,
        neurons: n,
        w1,
        hidden,
    })
}

impl RandomWeights {
    pub fn layers(&self) -> usize {
        1 + self.hidden.len()
    }

    /// Width `N + k` of every layer's feature matrix.
    pub fn feature_dim(&self) -> usize {
        self.neurons + self.input_dim
    }

    pub fn snapshot(&self) -> WeightSnapshot {
        WeightSnapshot {
            format_version: WEIGHT_SNAPSHOT_VERSION,
            seed: self.seed,
            init: self.init,
            scale: self.scale,
            input_dim: self.input_dim,
            neurons: self.neurons,
            w1: MatrixRecord::from(&self.w1),
            hidden: self.hidden.iter().map(MatrixRecord::from).collect(),
        }
    }
}

pub const WEIGHT_SNAPSHOT_VERSION: u32 = 1;

/// JSON form of [`RandomWeights`]. Matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSnapshot {
    pub format_version: u32,
    pub seed: u64,
    pub init: WeightInit,
    pub scale: f64,
    pub input_dim: usize,
    pub neurons: usize,
    pub w1: MatrixRecord,
    pub hidden: Vec<MatrixRecord>,
}

impl WeightSnapshot {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn restore(&self) -> Result<RandomWeights> {
        if self.format_version != WEIGHT_SNAPSHOT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported weight snapshot version {}",
                self.format_version
            )));
        }
        let w1 = self.w1.to_matrix()?;
        if w1.shape() != (self.input_dim, self.neurons) {
            return Err(Error::shape(
                "snapshot w1",
                format!("{}x{}", self.input_dim, self.neurons),
                format!("{}x{}", w1.nrows(), w1.ncols()),
            ));
        }
        let hidden = self
            .hidden
            .iter()
            .map(MatrixRecord::to_matrix)
            .collect::<Result<Vec<_>>>()?;
        Ok(RandomWeights {
            seed: self.seed,
            init: self.init,
            scale: self.scale,
            input_dim: self.input_dim,
            neurons: self.neurons,
            w1,
            hidden,
        })
    }
}

/// Per-layer feature matrices `Dl = [Hl | X]`, each `b x (N + k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerFeatures {
    pub d: Vec<Mat>,
}

impl LayerFeatures {
    pub fn layers(&self) -> usize {
        self.d.len()
    }

    pub fn rows(&self) -> usize {
        self.d.first().map_or(0, |d| d.nrows())
    }
}

fn activate(m: Mat, g: Activation) -> Mat {
    m.map(|v| g.apply(v))
}

pub fn extract_features(weights: &RandomWeights, cfg: &EdRvflConfig, x: &Mat) -> Result<LayerFeatures> {
    if x.ncols() != weights.input_dim {
        return Err(Error::shape("layer 1 input width", weights.input_dim, x.ncols()));
    }
    let g = cfg.activation;
    let mut d = Vec::with_capacity(weights.layers());
    let h1 = activate(x * &weights.w1, g);
    d.push(hstack(&h1, x));
    for (i, w) in weights.hidden.iter().enumerate() {
        let prev = d.last().expect("layer 1 present");
        if prev.ncols() != w.nrows() {
            return Err(Error::shape(
                format!("layer {} input width", i + 2),
                w.nrows(),
                prev.ncols(),
            ));
        }
        let h = activate(prev * w, g);
        d.push(hstack(&h, x));
    }
    Ok(LayerFeatures { d })
}

/// Configuration plus the frozen weights it generated.
#[derive(Debug, Clone, PartialEq)]
pub struct EdRvflNetwork {
    pub config: EdRvflConfig,
    pub weights: RandomWeights,
}

impl EdRvflNetwork {
    pub fn new(config: EdRvflConfig, input_dim: usize) -> Result<Self> {
        let weights = init_random_weights(&config, input_dim)?;
        Ok(EdRvflNetwork { config, weights })
    }
}

/// Maps a raw batch onto the per-layer design matrices the learners read.
pub trait FeatureMap: Sync {
    fn layers(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn lambda(&self, layer: usize) -> f64;
    fn features(&self, x: &Mat) -> Result<LayerFeatures>;
}

impl FeatureMap for EdRvflNetwork {
    fn layers(&self) -> usize {
        self.weights.layers()
    }

    fn feature_dim(&self) -> usize {
        self.weights.feature_dim()
    }

    fn lambda(&self, layer: usize) -> f64 {
        self.config.lambda(layer)
    }

    fn features(&self, x: &Mat) -> Result<LayerFeatures> {
        extract_features(&self.weights, &self.config, x)
    }
}

/// A single learner reading the raw inputs directly (`D = X`), as in the
/// regret simulations where the feature stream itself is drawn at random.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectFeatures {
    pub input_dim: usize,
    pub lambda: f64,
}

impl FeatureMap for DirectFeatures {
    fn layers(&self) -> usize {
        1
    }

    fn feature_dim(&self) -> usize {
        self.input_dim
    }

    fn lambda(&self, _layer: usize) -> f64 {
        self.lambda
    }

    fn features(&self, x: &Mat) -> Result<LayerFeatures> {
        if x.ncols() != self.input_dim {
            return Err(Error::shape("direct feature width", self.input_dim, x.ncols()));
        }
        Ok(LayerFeatures { d: vec![x.clone()] })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    #[default]
    RegressionMean,
    RegressionMedian,
    ClassificationSoftmaxMean,
}

/// Row-wise softmax.
pub fn softmax_rows(m: &Mat) -> Mat {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.apply(|v| *v = (*v - max).exp());
        let sum = row.sum();
        row.apply(|v| *v /= sum);
    }
    out
}

pub fn ensemble_predict(per_layer: &[Mat], mode: EnsembleMode) -> Result<Mat> {
    let first = per_layer
        .first()
        .ok_or_else(|| Error::Arity("no per-layer predictions to aggregate".into()))?;
    let shape = first.shape();
    if let Some(bad) = per_layer.iter().find(|p| p.shape() != shape) {
        return Err(Error::shape(
            "ensemble prediction",
            format!("{}x{}", shape.0, shape.1),
            format!("{}x{}", bad.nrows(), bad.ncols()),
        ));
    }
    let n = per_layer.len() as f64;
    match mode {
        EnsembleMode::RegressionMean => {
            let mut acc = Mat::zeros(shape.0, shape.1);
            for p in per_layer {
                acc += p;
            }
            Ok(acc / n)
        }
        EnsembleMode::RegressionMedian => {
            let mut scratch = vec![0.0; per_layer.len()];
            Ok(Mat::from_fn(shape.0, shape.1, |i, j| {
                for (s, p) in scratch.iter_mut().zip(per_layer) {
                    *s = p[(i, j)];
                }
                median(&mut scratch)
            }))
        }
        EnsembleMode::ClassificationSoftmaxMean => {
            let mut acc = Mat::zeros(shape.0, shape.1);
            for p in per_layer {
                acc += softmax_rows(p);
            }
            Ok(acc / n)
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-row argmax; ties go to the lowest class index.
pub fn classify(scores: &Mat) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
