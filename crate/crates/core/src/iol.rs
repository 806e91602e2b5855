//! Incremental online learning of the linear read-outs.
//!
//! Each sub-learner keeps a weight matrix `beta` and a matrix learning rate
//! `eta`, the inverse of the regularized Gram matrix of every feature batch
//! absorbed so far. `eta` is advanced with the Woodbury identity through a
//! `b x b` solve, so no past batch is ever revisited.
//!
//! * Ridge: `eta` absorbs the current batch, then
//!   `beta' = beta - eta' (D'D beta - D'Y)`.
//! * Forward: `eta` runs one batch ahead. It absorbs the *next* batch's
//!   (unlabelled) features, then
//!   `beta' = beta - eta+ (Dn'Dn beta - D'Y) + eta+ (Dn'Dn - D'D) beta0`.
//!   Before the first labelled step the forward learner absorbs the first
//!   batch's features ([`LearnerState::prime`]), so after `t` steps `beta`
//!   is the exact minimizer of
//!   `1/2 lambda |beta - beta0|^2 + sum_{q<t} L_q(beta) + 1/2 |D_t (beta - beta0)|^2`.

use std::time::{Duration, Instant};

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ensemble_predict, EnsembleMode, FeatureMap, LayerFeatures};
use crate::linalg::{cholesky, spd_solve, symmetrize, Mat, MatrixRecord};
use crate::stream::{rng_from_seed, Batch, BatchStream};
use crate::tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Ridge,
    Forward,
}

impl Style {
    pub fn name(self) -> &'static str {
        match self {
            Style::Ridge => "ridge",
            Style::Forward => "forward",
        }
    }
}

impl std::fmt::Display for Style {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One sub-learner: weights `beta` ((N+k) x m), learning rate `eta`
/// ((N+k) x (N+k), SPD) and the number of labelled batches consumed.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub beta: Mat,
    pub eta: Mat,
    pub t: usize,
    pub style: Style,
    pub lambda: f64,
    pub beta0: Mat,
    /// Forward only: `eta` already holds the Gram term of the batch about to
    /// be learned.
    pub primed: bool,
}

pub fn init_learner(
    lambda: f64,
    feature_dim: usize,
    target_dim: usize,
    style: Style,
    beta0: Option<Mat>,
) -> Result<LearnerState> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be finite and > 0, got {lambda}")));
    }
    let beta0 = match beta0 {
        Some(b) if b.shape() != (feature_dim, target_dim) => {
            return Err(Error::shape(
                "beta0",
                format!("{feature_dim}x{target_dim}"),
                format!("{}x{}", b.nrows(), b.ncols()),
            ))
        }
        Some(b) => b,
        None => Mat::zeros(feature_dim, target_dim),
    };
    Ok(LearnerState {
        beta: beta0.clone(),
        eta: Mat::identity(feature_dim, feature_dim) / lambda,
        t: 0,
        style,
        lambda,
        beta0,
        primed: false,
    })
}

/// Result of a Woodbury learning-rate update.
#[derive(Debug, Clone)]
pub struct RateUpdate {
    pub eta: Mat,
    /// Reciprocal condition estimate of `I + D eta D'` from its Cholesky
    /// diagonal; 1 for an empty batch.
    pub inner_rcond: f64,
}

/// `(eta^-1 + D'D)^-1` computed as `eta - eta D' (I + D eta D')^-1 D eta`.
pub fn smw_rate_update(eta: &Mat, d: &Mat) -> Result<Mat> {
    smw_rate_update_checked(eta, d).map(|u| u.eta)
}

pub fn smw_rate_update_checked(eta: &Mat, d: &Mat) -> Result<RateUpdate> {
    let p = eta.nrows();
    if eta.ncols() != p {
        return Err(Error::shape("learning rate", "square", format!("{}x{}", p, eta.ncols())));
    }
    if d.ncols() != p {
        return Err(Error::shape("feature batch width", p, d.ncols()));
    }
    if d.nrows() == 0 {
        return Ok(RateUpdate {
            eta: eta.clone(),
            inner_rcond: 1.0,
        });
    }
    let b = d.nrows();
    // g = eta D' (p x b); eta is symmetric so D eta = g'.
    let g = eta * d.transpose();
    let mut inner = d * &g;
    for i in 0..b {
        inner[(i, i)] += 1.0;
    }
    let chol = cholesky(&inner, "inner Woodbury system")?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    let inner_rcond = if hi > 0.0 { (lo / hi).powi(2) } else { 0.0 };
    if inner_rcond < tolerance::INNER_RCOND_WARN {
        warn!("inner Woodbury system badly conditioned (rcond ~ {inner_rcond:.3e})");
    }
    let solved = chol.solve(&g.transpose());
    let mut next = eta - &g * solved;
    symmetrize(&mut next);
    Ok(RateUpdate {
        eta: next,
        inner_rcond,
    })
}

impl LearnerState {
    pub fn feature_dim(&self) -> usize {
        self.beta.nrows()
    }

    pub fn target_dim(&self) -> usize {
        self.beta.ncols()
    }

    pub fn predict(&self, d: &Mat) -> Mat {
        d * &self.beta
    }

    fn check_batch(&self, d: &Mat, y: Option<&Mat>, what: &str) -> Result<()> {
        if d.ncols() != self.feature_dim() {
            return Err(Error::shape(format!("{what} feature width"), self.feature_dim(), d.ncols()));
        }
        if let Some(y) = y {
            if y.ncols() != self.target_dim() {
                return Err(Error::shape(format!("{what} target width"), self.target_dim(), y.ncols()));
            }
            if y.nrows() != d.nrows() {
                return Err(Error::shape(format!("{what} rows"), d.nrows(), y.nrows()));
            }
        }
        Ok(())
    }

    pub fn ridge_step(&self, d: &Mat, y: &Mat) -> Result<LearnerState> {
        if self.style != Style::Ridge {
            return Err(Error::Usage("ridge_step called on a forward learner".into()));
        }
        self.check_batch(d, Some(y), "ridge batch")?;
        let eta = smw_rate_update(&self.eta, d)?;
        let residual = d * &self.beta - y;
        let grad = d.transpose() * residual;
        let beta = &self.beta - &eta * grad;
        Ok(LearnerState {
            beta,
            eta,
            t: self.t + 1,
            ..self.clone_meta()
        })
    }

    /// Absorbs the first batch's features into a forward learner before it
    /// sees any labels. A no-op for an already primed learner.
    pub fn prime(&self, d_first: &Mat) -> Result<LearnerState> {
        if self.style != Style::Forward {
            return Err(Error::Usage("only forward learners are primed".into()));
        }
        if self.primed {
            return Ok(self.clone());
        }
        self.check_batch(d_first, None, "priming batch")?;
        let eta = smw_rate_update(&self.eta, d_first)?;
        let shift = d_first.transpose() * (d_first * (&self.beta - &self.beta0));
        let beta = &self.beta - &eta * shift;
        Ok(LearnerState {
            beta,
            eta,
            primed: true,
            t: self.t,
            ..self.clone_meta()
        })
    }

    pub fn forward_step(&self, d_t: &Mat, y_t: &Mat, d_next: &Mat) -> Result<LearnerState> {
        if self.style != Style::Forward {
            return Err(Error::Usage("forward_step called on a ridge learner".into()));
        }
        self.check_batch(d_t, Some(y_t), "forward batch")?;
        self.check_batch(d_next, None, "lookahead batch")?;
        let primed = self.prime(d_t)?;
        let eta = smw_rate_update(&primed.eta, d_next)?;
        let drive = d_next.transpose() * (d_next * &primed.beta) - d_t.transpose() * y_t;
        let mut beta = &primed.beta - &eta * drive;
        if self.beta0.iter().any(|v| *v != 0.0) {
            beta += forward_correction(&eta, d_t, d_next, &self.beta0);
        }
        Ok(LearnerState {
            beta,
            eta,
            t: self.t + 1,
            primed: true,
            ..self.clone_meta()
        })
    }

    /// Dispatches on style; `d_next` is required for forward learners.
    pub fn step(&self, d_t: &Mat, y_t: &Mat, d_next: Option<&Mat>) -> Result<LearnerState> {
        match self.style {
            Style::Ridge => self.ridge_step(d_t, y_t),
            Style::Forward => {
                let d_next = d_next.ok_or_else(|| {
                    Error::Usage("forward step requires lookahead features".into())
                })?;
                self.forward_step(d_t, y_t, d_next)
            }
        }
    }

    fn clone_meta(&self) -> LearnerState {
        LearnerState {
            beta: Mat::zeros(0, 0),
            eta: Mat::zeros(0, 0),
            t: self.t,
            style: self.style,
            lambda: self.lambda,
            beta0: self.beta0.clone(),
            primed: self.primed,
        }
    }

    pub fn snapshot(&self) -> LearnerSnapshot {
        LearnerSnapshot {
            format_version: LEARNER_SNAPSHOT_VERSION,
            style: self.style,
            lambda: self.lambda,
            t: self.t,
            primed: self.primed,
            beta: MatrixRecord::from(&self.beta),
            eta: MatrixRecord::from(&self.eta),
            beta0: MatrixRecord::from(&self.beta0),
        }
    }
}

/// `eta+ (Dn'Dn - D'D) beta0`, the warm-start term of the forward update.
/// Exactly zero when `d_next == d_t`.
pub fn forward_correction(eta_next: &Mat, d_t: &Mat, d_next: &Mat, beta0: &Mat) -> Mat {
    let ahead = d_next.transpose() * (d_next * beta0);
    let behind = d_t.transpose() * (d_t * beta0);
    eta_next * (ahead - behind)
}

pub const LEARNER_SNAPSHOT_VERSION: u32 = 1;

/// Pause/resume record of a [`LearnerState`]; matrices are row-major f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSnapshot {
    pub format_version: u32,
    pub style: Style,
    pub lambda: f64,
    pub t: usize,
    pub primed: bool,
    pub beta: MatrixRecord,
    pub eta: MatrixRecord,
    pub beta0: MatrixRecord,
}

impl LearnerSnapshot {
    pub fn restore(&self) -> Result<LearnerState> {
        if self.format_version != LEARNER_SNAPSHOT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported learner snapshot version {}",
                self.format_version
            )));
        }
        let beta = self.beta.to_matrix()?;
        let eta = self.eta.to_matrix()?;
        let beta0 = self.beta0.to_matrix()?;
        if eta.shape() != (beta.nrows(), beta.nrows()) || beta0.shape() != beta.shape() {
            return Err(Error::shape(
                "learner snapshot",
                "eta p x p and beta0 shaped like beta",
                format!("beta {:?}, eta {:?}, beta0 {:?}", beta.shape(), eta.shape(), beta0.shape()),
            ));
        }
        Ok(LearnerState {
            beta,
            eta,
            t: self.t,
            style: self.style,
            lambda: self.lambda,
            beta0,
            primed: self.primed,
        })
    }
}

/// Primal closed form `(D'D + lambda I)^-1 D'Y`.
pub fn offline_ridge_solve_primal(d: &Mat, y: &Mat, lambda: f64) -> Result<Mat> {
    let mut gram = d.transpose() * d;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    spd_solve(&gram, &(d.transpose() * y))
}

/// Dual closed form `D' (D D' + lambda I)^-1 Y`.
pub fn offline_ridge_solve_dual(d: &Mat, y: &Mat, lambda: f64) -> Result<Mat> {
    let mut kernel = d * d.transpose();
    for i in 0..kernel.nrows() {
        kernel[(i, i)] += lambda;
    }
    Ok(d.transpose() * spd_solve(&kernel, y)?)
}

/// Offline ridge expert on stacked data, using whichever Gram matrix is smaller.
pub fn offline_ridge_solve(d: &Mat, y: &Mat, lambda: f64) -> Result<Mat> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
    }
    if d.nrows() != y.nrows() {
        return Err(Error::shape("offline ridge rows", d.nrows(), y.nrows()));
    }
    if d.ncols() <= d.nrows() {
        offline_ridge_solve_primal(d, y, lambda)
    } else {
        offline_ridge_solve_dual(d, y, lambda)
    }
}

/// Exact minimizer of
/// `1/2 lambda |beta - beta0|^2 + 1/2 |D beta - Y|^2 + 1/2 |Dn (beta - beta0)|^2`,
/// i.e. `(lambda I + D'D + Dn'Dn)^-1 (D'Y + (lambda I + Dn'Dn) beta0)`.
pub fn offline_forward_solve(
    d: &Mat,
    y: &Mat,
    d_next: &Mat,
    lambda: f64,
    beta0: Option<&Mat>,
) -> Result<Mat> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
    }
    if d.nrows() != y.nrows() {
        return Err(Error::shape("offline forward rows", d.nrows(), y.nrows()));
    }
    if d_next.ncols() != d.ncols() {
        return Err(Error::shape("lookahead width", d.ncols(), d_next.ncols()));
    }
    let ahead = d_next.transpose() * d_next;
    let mut hessian = d.transpose() * d + &ahead;
    for i in 0..hessian.nrows() {
        hessian[(i, i)] += lambda;
    }
    let mut rhs = d.transpose() * y;
    if let Some(b0) = beta0 {
        rhs += b0 * lambda + &ahead * b0;
    }
    spd_solve(&hessian, &rhs)
}

/// The cluster of per-layer learners inside one network.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleLearner {
    pub layers: Vec<LearnerState>,
    pub style: Style,
    pub mode: EnsembleMode,
}

impl EnsembleLearner {
    pub fn new<F: FeatureMap + ?Sized>(
        map: &F,
        target_dim: usize,
        style: Style,
        mode: EnsembleMode,
        beta0: Option<&Mat>,
    ) -> Result<Self> {
        let layers = (0..map.layers())
            .map(|l| init_learner(map.lambda(l), map.feature_dim(), target_dim, style, beta0.cloned()))
            .collect::<Result<Vec<_>>>()?;
        Ok(EnsembleLearner {
            layers,
            style,
            mode,
        })
    }

    pub fn t(&self) -> usize {
        self.layers.first().map_or(0, |l| l.t)
    }

    fn check_layers(&self, features: &LayerFeatures) -> Result<()> {
        if features.layers() != self.layers.len() {
            return Err(Error::shape("feature layers", self.layers.len(), features.layers()));
        }
        Ok(())
    }

    pub fn layer_predictions(&self, features: &LayerFeatures) -> Result<Vec<Mat>> {
        self.check_layers(features)?;
        Ok(self
            .layers
            .iter()
            .zip(&features.d)
            .map(|(s, d)| s.predict(d))
            .collect())
    }

    pub fn predict(&self, features: &LayerFeatures) -> Result<Mat> {
        ensemble_predict(&self.layer_predictions(features)?, self.mode)
    }

    /// Runs one update on every layer; layers are independent given their
    /// features and are updated in parallel.
    pub fn step(&self, features: &LayerFeatures, y: &Mat, lookahead: Option<&LayerFeatures>) -> Result<Self> {
        self.check_layers(features)?;
        if let Some(la) = lookahead {
            self.check_layers(la)?;
        }
        let layers = self
            .layers
            .par_iter()
            .enumerate()
            .map(|(l, s)| s.step(&features.d[l], y, lookahead.map(|la| &la.d[l])))
            .collect::<Result<Vec<_>>>()?;
        Ok(EnsembleLearner {
            layers,
            style: self.style,
            mode: self.mode,
        })
    }

    pub fn prime(&self, features: &LayerFeatures) -> Result<Self> {
        self.check_layers(features)?;
        let layers = self
            .layers
            .par_iter()
            .zip(features.d.par_iter())
            .map(|(s, d)| s.prime(d))
            .collect::<Result<Vec<_>>>()?;
        Ok(EnsembleLearner {
            layers,
            style: self.style,
            mode: self.mode,
        })
    }

    pub fn snapshot(&self) -> EnsembleSnapshot {
        EnsembleSnapshot {
            style: self.style,
            mode: self.mode,
            layers: self.layers.iter().map(LearnerState::snapshot).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSnapshot {
    pub style: Style,
    pub mode: EnsembleMode,
    pub layers: Vec<LearnerSnapshot>,
}

impl EnsembleSnapshot {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn restore(&self) -> Result<EnsembleLearner> {
        Ok(EnsembleLearner {
            style: self.style,
            mode: self.mode,
            layers: self
                .layers
                .iter()
                .map(LearnerSnapshot::restore)
                .collect::<Result<Vec<_>>>()?,
        })
    }
}

/// Lookahead used by the forward learner at the final batch, where no next
/// batch exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum LookaheadPolicy {
    /// Reuse the final batch's own features.
    #[default]
    RepeatLast,
    /// Reuse the features of one already seen batch, chosen by seed before
    /// the run starts.
    RandomSeen { seed: u64 },
    /// Leave the final batch unlearned.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IolOptions {
    pub lookahead: LookaheadPolicy,
    pub beta0: Option<Mat>,
    /// Split oversized batches into sub-batches of at most this many rows.
    pub max_sub_batch: Option<usize>,
    pub keep_snapshots: bool,
    pub mode: EnsembleMode,
}

impl Default for IolOptions {
    fn default() -> Self {
        IolOptions {
            lookahead: LookaheadPolicy::RepeatLast,
            beta0: None,
            max_sub_batch: None,
            keep_snapshots: false,
            mode: EnsembleMode::RegressionMean,
        }
    }
}

/// Everything an observer may inspect after one update.
pub struct StepRecord<'a> {
    pub t: usize,
    pub batch: &'a Batch,
    pub features: &'a LayerFeatures,
    /// Forward only: the features the learning rate advanced by.
    pub lookahead: Option<&'a LayerFeatures>,
    pub before: &'a EnsembleLearner,
    pub after: &'a EnsembleLearner,
    pub elapsed: Duration,
}

pub trait IolObserver {
    /// Called once with the untrained learner, after forward priming.
    fn on_start(&mut self, _learner: &EnsembleLearner) -> Result<()> {
        Ok(())
    }

    fn on_step(&mut self, _step: &StepRecord<'_>) -> Result<()> {
        Ok(())
    }
}

impl IolObserver for () {}

#[derive(Debug, Clone)]
pub struct IolRun {
    pub learner: EnsembleLearner,
    /// Initial (primed, for forward) learner followed by the learner after every step, when kept.
    pub snapshots: Vec<EnsembleLearner>,
    pub steps: usize,
    /// Largest number of per-batch feature sets held at once.
    pub peak_resident_features: usize,
}

/// Streams every batch through the learners exactly once.
pub fn run_iol<F: FeatureMap + ?Sized>(
    map: &F,
    stream: &BatchStream,
    style: Style,
    opts: &IolOptions,
    observer: &mut dyn IolObserver,
) -> Result<IolRun> {
    let split;
    let stream = match opts.max_sub_batch {
        Some(max) => {
            split = stream.split_batches(max)?;
            &split
        }
        None => stream,
    };
    let batches = stream.batches();
    if batches.is_empty() {
        return Err(Error::EmptyInput("stream has no batches".into()));
    }
    let mut learner = EnsembleLearner::new(map, stream.target_dim(), style, opts.mode, opts.beta0.as_ref())?;
    let n = batches.len();
    let surrogate_index = match (style, opts.lookahead) {
        (Style::Forward, LookaheadPolicy::RandomSeen { seed }) => Some(rng_from_seed(seed).random_range(0..n)),
        _ => None,
    };
    let mut surrogate: Option<LayerFeatures> = None;
    let mut peak = 0usize;
    let mut steps = 0usize;

    let mut current = map.features(&batches[0].x)?;
    if style == Style::Forward {
        learner = learner.prime(&current)?;
    }
    observer.on_start(&learner)?;
    let mut snapshots = Vec::new();
    if opts.keep_snapshots {
        snapshots.push(learner.clone());
    }
    for (t, batch) in batches.iter().enumerate() {
        if surrogate_index == Some(t) {
            surrogate = Some(current.clone());
        }
        let started = Instant::now();
        let next = match style {
            Style::Forward if t + 1 < n => Some(map.features(&batches[t + 1].x)?),
            _ => None,
        };
        let lookahead = match style {
            Style::Ridge => None,
            Style::Forward => match (&next, opts.lookahead) {
                (Some(f), _) => Some(f),
                (None, LookaheadPolicy::RepeatLast) => Some(&current),
                (None, LookaheadPolicy::RandomSeen { .. }) => surrogate.as_ref(),
                (None, LookaheadPolicy::Skip) => None,
            },
        };
        peak = peak.max(1 + usize::from(next.is_some()) + usize::from(surrogate.is_some()));
        if style == Style::Forward && lookahead.is_none() {
            break;
        }
        let after = learner.step(&current, &batch.y, lookahead)?;
        let elapsed = started.elapsed();
        observer.on_step(&StepRecord {
            t,
            batch,
            features: &current,
            lookahead,
            before: &learner,
            after: &after,
            elapsed,
        })?;
        if opts.keep_snapshots {
            snapshots.push(after.clone());
        }
        learner = after;
        steps += 1;
        if t + 1 < n {
            current = match next {
                Some(f) => f,
                None => map.features(&batches[t + 1].x)?,
            };
        }
    }
    Ok(IolRun {
        learner,
        snapshots,
        steps,
        peak_resident_features: peak,
    })
}
