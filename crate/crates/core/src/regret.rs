//! Online-to-offline regret accounting and the closed-form regret bounds.
//!
//! Losses use the `1/2 |D beta - Y|_F^2` convention; quadratic forms with
//! several targets are reduced to scalars with a trace.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iol::{LearnerState, Style};
use crate::linalg::{max_abs, spd_solve, Mat};

/// `1/2 |D beta - Y|_F^2`.
pub fn batch_loss(d: &Mat, beta: &Mat, y: &Mat) -> f64 {
    0.5 * (d * beta - y).norm_squared()
}

/// `2 (learner_loss - oracle_loss)`; negative on batches where the learner
/// happens to fit the noise better than the oracle.
pub fn immediate_regret(learner_loss: f64, oracle_loss: f64) -> f64 {
    2.0 * (learner_loss - oracle_loss)
}

/// `tr(a' eta a)`.
fn quad_trace(eta: &Mat, a: &Mat) -> f64 {
    (a.transpose() * eta * a).trace()
}

/// `tr(R' D eta D' R)` with `R = D beta - Y`. `beta` is the weight before the
/// step and `eta` the ridge rate after absorbing `d`.
pub fn regret_term_ridge(d: &Mat, beta: &Mat, y: &Mat, eta: &Mat) -> f64 {
    let r = d * beta - y;
    quad_trace(eta, &(d.transpose() * r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardTerms {
    /// `tr((D'Y)' eta D'Y)`.
    pub term1: f64,
    /// `tr(v' eta v)` with `v = Dn'Dn beta_next`.
    pub term2: f64,
}

impl ForwardTerms {
    pub fn difference(&self) -> f64 {
        self.term1 - self.term2
    }
}

pub fn regret_terms_forward(d_t: &Mat, y_t: &Mat, d_next: &Mat, beta_next: &Mat, eta: &Mat) -> ForwardTerms {
    let u = d_t.transpose() * y_t;
    let v = d_next.transpose() * (d_next * beta_next);
    ForwardTerms {
        term1: quad_trace(eta, &u),
        term2: quad_trace(eta, &v),
    }
}

/// Running sufficient statistics `sum D'D`, `sum D'Y`, `sum tr(Y'Y)` of a
/// stream prefix; enough to solve and evaluate the regularized offline
/// objective at every step without keeping any batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GramAccumulator {
    pub gram: Mat,
    pub cross: Mat,
    pub yy: f64,
    pub rows: usize,
}

impl GramAccumulator {
    pub fn new(feature_dim: usize, target_dim: usize) -> Self {
        GramAccumulator {
            gram: Mat::zeros(feature_dim, feature_dim),
            cross: Mat::zeros(feature_dim, target_dim),
            yy: 0.0,
            rows: 0,
        }
    }

    pub fn absorb(&mut self, d: &Mat, y: &Mat) -> Result<()> {
        if d.ncols() != self.gram.nrows() || y.ncols() != self.cross.ncols() || d.nrows() != y.nrows() {
            return Err(Error::shape(
                "gram accumulator batch",
                format!("b x {} and b x {}", self.gram.nrows(), self.cross.ncols()),
                format!("{}x{} and {}x{}", d.nrows(), d.ncols(), y.nrows(), y.ncols()),
            ));
        }
        self.gram += d.transpose() * d;
        self.cross += d.transpose() * y;
        self.yy += y.norm_squared();
        self.rows += d.nrows();
        Ok(())
    }

    /// Minimizer of `1/2 lambda |beta - beta0|^2 + sum_t L_t(beta)`.
    pub fn ridge_optimum(&self, lambda: f64, beta0: &Mat) -> Result<Mat> {
        let mut h = self.gram.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += lambda;
        }
        spd_solve(&h, &(&self.cross + beta0 * lambda))
    }

    /// `sum_t L_t(beta)`.
    pub fn data_loss(&self, beta: &Mat) -> f64 {
        0.5 * (beta.transpose() * &self.gram * beta).trace() - beta.dot(&self.cross) + 0.5 * self.yy
    }

    pub fn objective(&self, beta: &Mat, lambda: f64, beta0: &Mat) -> f64 {
        regularizer(beta, lambda, beta0) + self.data_loss(beta)
    }
}

/// `1/2 lambda |beta - beta0|_F^2`, the Bregman divergence of the initial
/// regularizer.
pub fn regularizer(beta: &Mat, lambda: f64, beta0: &Mat) -> f64 {
    0.5 * lambda * (beta - beta0).norm_squared()
}

/// The comparator a cumulative regret is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertKind {
    /// Minimizer of the regularized offline objective over the prefix.
    RidgeOptimum,
    /// The data-generating weights.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretVariant {
    /// `sum L_t(beta_t) - [1/2 lambda |b - beta0|^2 + sum L_t(b)]`.
    Regularized,
    /// `sum L_t(beta_t) - sum L_t(b)`.
    Unregularized,
    /// Regularized regret plus `1/2 lambda |beta_final - beta0|^2`.
    FinalShifted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineExpert {
    pub beta: Mat,
    pub kind: ExpertKind,
}

/// Cumulative regret of the losses recorded in `ledger` against `expert` on
/// the stacked prefix `(d, y)` the ledger has seen.
pub fn cumulative_regret(
    ledger: &RegretLedger,
    expert: &OfflineExpert,
    d: &Mat,
    y: &Mat,
    variant: RegretVariant,
) -> Result<f64> {
    if variant != RegretVariant::Unregularized && expert.kind != ExpertKind::RidgeOptimum {
        return Err(Error::Usage(
            "regularized cumulative regret needs the regularized offline optimum as expert".into(),
        ));
    }
    if d.nrows() != y.nrows() || expert.beta.nrows() != d.ncols() || expert.beta.ncols() != y.ncols() {
        return Err(Error::shape(
            "cumulative regret prefix",
            format!("b x {} features and b x {} targets", expert.beta.nrows(), expert.beta.ncols()),
            format!("{}x{} and {}x{}", d.nrows(), d.ncols(), y.nrows(), y.ncols()),
        ));
    }
    let online: f64 = ledger.steps.iter().map(|s| s.learner_loss).sum();
    let data = batch_loss(d, &expert.beta, y);
    let reg = regularizer(&expert.beta, ledger.lambda, &ledger.beta0);
    Ok(match variant {
        RegretVariant::Unregularized => online - data,
        RegretVariant::Regularized => online - data - reg,
        RegretVariant::FinalShifted => {
            let last = ledger
                .final_beta
                .as_ref()
                .ok_or_else(|| Error::EmptyInput("ledger has no recorded steps".into()))?;
            online - data - reg + regularizer(last, ledger.lambda, &ledger.beta0)
        }
    })
}

/// One ledger row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretStep {
    pub t: usize,
    pub learner_loss: f64,
    /// Learner loss with predictions clipped to `[-y_max, y_max]`.
    pub learner_loss_clipped: f64,
    pub oracle_loss: Option<f64>,
    pub immediate_regret: Option<f64>,
    pub irt_ridge: Option<f64>,
    /// Forward terms evaluated with the rate before the step.
    pub irt_forward_pre: Option<ForwardTerms>,
    /// Forward terms evaluated with the rate after the step.
    pub irt_forward_post: Option<ForwardTerms>,
    /// Regularized offline objective at its optimum over the prefix.
    pub offline_objective: f64,
    /// Increment of `cr_offline` at this step.
    pub relative_regret: f64,
    pub cr_offline: f64,
    pub cr_offline_clipped: f64,
    /// Cumulative regret against the oracle weights, without regularizer.
    pub cr_oracle: Option<f64>,
    pub d_max: f64,
    pub y_max: f64,
}

/// Per-learner regret trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    pub style: Style,
    pub lambda: f64,
    pub beta0: Mat,
    pub oracle: Option<Mat>,
    pub steps: Vec<RegretStep>,
    pub accumulator: GramAccumulator,
    pub final_beta: Option<Mat>,
    pub d_max: f64,
    pub y_max: f64,
    /// Running `max |Y|`, the clipping range.
    pub y_abs_max: f64,
    pub max_batch: usize,
    online_loss: f64,
    online_loss_clipped: f64,
    oracle_gap: f64,
}

impl RegretLedger {
    pub fn new(style: Style, lambda: f64, beta0: Mat, oracle: Option<Mat>) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
        }
        if let Some(o) = &oracle {
            if o.shape() != beta0.shape() {
                return Err(Error::shape(
                    "oracle weights",
                    format!("{}x{}", beta0.nrows(), beta0.ncols()),
                    format!("{}x{}", o.nrows(), o.ncols()),
                ));
            }
        }
        Ok(RegretLedger {
            style,
            lambda,
            accumulator: GramAccumulator::new(beta0.nrows(), beta0.ncols()),
            beta0,
            oracle,
            steps: Vec::new(),
            final_beta: None,
            d_max: 0.0,
            y_max: 0.0,
            y_abs_max: 0.0,
            max_batch: 0,
            online_loss: 0.0,
            online_loss_clipped: 0.0,
            oracle_gap: 0.0,
        })
    }

    pub fn for_learner(learner: &LearnerState, oracle: Option<Mat>) -> Result<Self> {
        Self::new(learner.style, learner.lambda, learner.beta0.clone(), oracle)
    }

    /// Records one update from `before` to `after` on batch `(d, y)`;
    /// `lookahead` is the forward learner's next-batch features.
    pub fn record(
        &mut self,
        before: &LearnerState,
        after: &LearnerState,
        d: &Mat,
        y: &Mat,
        lookahead: Option<&Mat>,
    ) -> Result<&RegretStep> {
        if before.style != self.style || after.style != self.style {
            return Err(Error::Usage(format!("{} ledger fed a mismatched learner", self.style)));
        }
        self.accumulator.absorb(d, y)?;
        let pred = d * &before.beta;
        let learner_loss = 0.5 * (&pred - y).norm_squared();

        self.y_abs_max = self.y_abs_max.max(max_abs(y));
        let c = self.y_abs_max;
        let clipped = pred.map(|v| v.clamp(-c, c));
        let learner_loss_clipped = 0.5 * (&clipped - y).norm_squared();
        self.d_max = self.d_max.max(max_abs(d));
        self.y_max = self.y_max.max(self.y_abs_max).max(max_abs(&clipped));
        self.max_batch = self.max_batch.max(d.nrows());

        let (oracle_loss, immediate) = match &self.oracle {
            Some(o) => {
                let ol = batch_loss(d, o, y);
                self.oracle_gap += learner_loss - ol;
                (Some(ol), Some(immediate_regret(learner_loss, ol)))
            }
            None => (None, None),
        };
        let (irt_ridge, irt_forward_pre, irt_forward_post) = match self.style {
            Style::Ridge => (Some(regret_term_ridge(d, &before.beta, y, &after.eta)), None, None),
            Style::Forward => {
                let dn = lookahead.ok_or_else(|| Error::Usage("forward ledger needs the lookahead features".into()))?;
                (
                    None,
                    Some(regret_terms_forward(d, y, dn, &after.beta, &before.eta)),
                    Some(regret_terms_forward(d, y, dn, &after.beta, &after.eta)),
                )
            }
        };

        let expert = self.accumulator.ridge_optimum(self.lambda, &self.beta0)?;
        let offline_objective = self.accumulator.objective(&expert, self.lambda, &self.beta0);
        let previous_cr = self.steps.last().map_or(0.0, |s| s.cr_offline);
        self.online_loss += learner_loss;
        self.online_loss_clipped += learner_loss_clipped;
        let cr_offline = self.online_loss - offline_objective;
        self.final_beta = Some(after.beta.clone());
        self.steps.push(RegretStep {
            t: self.steps.len(),
            learner_loss,
            learner_loss_clipped,
            oracle_loss,
            immediate_regret: immediate,
            irt_ridge,
            irt_forward_pre,
            irt_forward_post,
            offline_objective,
            relative_regret: cr_offline - previous_cr,
            cr_offline,
            cr_offline_clipped: self.online_loss_clipped - offline_objective,
            cr_oracle: self.oracle.as_ref().map(|_| self.oracle_gap),
            d_max: self.d_max,
            y_max: self.y_max,
        });
        Ok(self.steps.last().expect("just pushed"))
    }

    pub fn cumulative(&self) -> Option<f64> {
        self.steps.last().map(|s| s.cr_offline)
    }

    /// Bound parameters measured from the recorded prefix.
    pub fn bound_params(&self, amplification: f64) -> Result<BoundParams> {
        if self.steps.is_empty() {
            return Err(Error::EmptyInput("ledger has no recorded steps".into()));
        }
        BoundParams::new(
            self.y_max,
            self.d_max,
            self.max_batch as f64,
            self.beta0.nrows() as f64,
            self.steps.len() as f64,
            self.lambda,
            amplification,
        )
    }

    /// The bound matching this ledger's style; the forward full form.
    pub fn bound(&self, amplification: f64) -> Result<f64> {
        let p = self.bound_params(amplification)?;
        Ok(match self.style {
            Style::Ridge => ridge_bound(&p),
            Style::Forward => forward_bound(&p).full,
        })
    }
}

/// Right side of the ridge telescoping identity:
/// `sum_j 1/2 |beta_j - beta_{j+1}|^2_{H_j} - 1/2 |b - beta_n|^2_{H_{n-1}}`
/// with `H_j = lambda I + sum_{i<=j} D_i'D_i`. `betas` holds `beta_0..beta_n`.
pub fn ridge_telescoping(betas: &[Mat], ds: &[Mat], lambda: f64, expert: &Mat) -> Result<f64> {
    if betas.len() != ds.len() + 1 || ds.is_empty() {
        return Err(Error::Arity(format!(
            "need n batches and n+1 weights, got {} and {}",
            ds.len(),
            betas.len()
        )));
    }
    let p = expert.nrows();
    let mut h = Mat::identity(p, p) * lambda;
    let mut total = 0.0;
    for (j, d) in ds.iter().enumerate() {
        h += d.transpose() * d;
        total += 0.5 * quad_trace(&h, &(&betas[j] - &betas[j + 1]));
    }
    total -= 0.5 * quad_trace(&h, &(expert - &betas[ds.len()]));
    Ok(total)
}

/// Right side of the forward telescoping identity. `betas` holds the primed
/// initial weights followed by the weights after each step, `lookaheads[j]`
/// the features the rate absorbed at step `j`.
pub fn forward_telescoping(
    betas: &[Mat],
    ds: &[Mat],
    lookaheads: &[Mat],
    lambda: f64,
    beta0: &Mat,
    expert: &Mat,
) -> Result<f64> {
    let n = ds.len();
    if betas.len() != n + 1 || lookaheads.len() != n || n == 0 {
        return Err(Error::Arity(format!(
            "need n batches, n lookaheads and n+1 weights, got {}, {} and {}",
            n,
            lookaheads.len(),
            betas.len()
        )));
    }
    let ahead_loss = |d: &Mat, b: &Mat| 0.5 * (d * (b - beta0)).norm_squared();
    let p = expert.nrows();
    let mut data_gram = Mat::identity(p, p) * lambda;
    let mut total = 0.0;
    let mut hessian = data_gram.clone();
    for j in 0..n {
        data_gram += ds[j].transpose() * &ds[j];
        hessian = &data_gram + lookaheads[j].transpose() * &lookaheads[j];
        total += 0.5 * quad_trace(&hessian, &(&betas[j] - &betas[j + 1]));
        total -= ahead_loss(&lookaheads[j], &betas[j]);
        let current = if j == 0 { &ds[0] } else { &lookaheads[j - 1] };
        total += ahead_loss(current, &betas[j]);
    }
    total -= 0.5 * quad_trace(&hessian, &(expert - &betas[n]));
    total += ahead_loss(&lookaheads[n - 1], expert);
    // V_0(beta_0): the regularizer and the first look-ahead loss at the start.
    total -= regularizer(&betas[0], lambda, beta0) + ahead_loss(&ds[0], &betas[0]);
    Ok(total)
}

/// Parameters of the closed-form regret bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub y_max: f64,
    pub d_max: f64,
    /// Batch size, or the largest batch for variable batch sizes.
    pub batch: f64,
    /// Feature dimension `N + k`.
    pub dim: f64,
    pub horizon: f64,
    pub lambda: f64,
    pub amplification: f64,
}

impl BoundParams {
    pub fn new(
        y_max: f64,
        d_max: f64,
        batch: f64,
        dim: f64,
        horizon: f64,
        lambda: f64,
        amplification: f64,
    ) -> Result<Self> {
        let p = BoundParams {
            y_max,
            d_max,
            batch,
            dim,
            horizon,
            lambda,
            amplification,
        };
        p.validate()?;
        Ok(p)
    }

    /// Uses `b_m = max b_i` for a stream with variable batch sizes.
    pub fn with_batch_sizes(mut self, sizes: &[usize]) -> Result<Self> {
        let bm = sizes
            .iter()
            .copied()
            .max()
            .ok_or_else(|| Error::EmptyInput("no batch sizes".into()))?;
        self.batch = bm as f64;
        self.validate()?;
        Ok(self)
    }

    /// Scales the regularizer with the batch volume (`lambda s <- lambda b`).
    pub fn volume_scaled(mut self) -> Self {
        self.amplification = self.batch;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("y_max", self.y_max),
            ("d_max", self.d_max),
            ("batch", self.batch),
            ("dim", self.dim),
            ("lambda", self.lambda),
            ("amplification", self.amplification),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("bound parameter {name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.horizon >= 1.0) || !self.horizon.is_finite() {
            return Err(Error::Domain(format!("horizon must be >= 1, got {}", self.horizon)));
        }
        Ok(())
    }

    /// `a1 = 2 Y^2 b (N+k)`.
    pub fn a1(&self) -> f64 {
        2.0 * self.y_max.powi(2) * self.batch * self.dim
    }

    /// `a2 = D^2 b / (lambda s)`.
    pub fn a2(&self) -> f64 {
        self.d_max.powi(2) * self.batch / (self.lambda * self.amplification)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardBound {
    pub full: f64,
    pub single_log: f64,
}

pub fn ridge_bound_at(p: &BoundParams, t: f64) -> f64 {
    p.a1() * (p.a2() * t).ln_1p()
}

pub fn forward_bound_at(p: &BoundParams, t: f64) -> ForwardBound {
    let a2 = p.a2();
    let single_log = 0.25 * p.a1() * (a2 * t).ln_1p();
    let tail = ((t - 1.0) * a2 / (1.0 + 2.0 * a2)).ln_1p();
    ForwardBound {
        full: single_log - 0.25 * p.a1() * tail,
        single_log,
    }
}

pub fn ridge_bound(p: &BoundParams) -> f64 {
    ridge_bound_at(p, p.horizon)
}

pub fn forward_bound(p: &BoundParams) -> ForwardBound {
    forward_bound_at(p, p.horizon)
}

/// Analytic time derivatives of the ridge and forward (full form) bounds.
pub fn bound_rates_at(p: &BoundParams, t: f64) -> (f64, f64) {
    let (a1, a2) = (p.a1(), p.a2());
    let ridge = a1 * a2 / (1.0 + a2 * t);
    let forward = 0.25 * a1 * (a2 / (1.0 + a2 * t) - a2 / (1.0 + a2 + a2 * t));
    (ridge, forward)
}

/// [`bound_rates_at`] over a grid of times.
pub fn bound_derivative_curves(p: &BoundParams, ts: &[f64]) -> (Vec<f64>, Vec<f64>) {
    ts.iter().map(|&t| bound_rates_at(p, t)).unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleBound {
    pub params: BoundParams,
    pub ridge: f64,
    pub forward: ForwardBound,
}

/// Ensemble bound from the sub-learners' parameters: smallest `lambda`,
/// largest `D`, `Y`, batch, dimension and horizon.
pub fn ensemble_bound(per_learner: &[BoundParams]) -> Result<EnsembleBound> {
    let first = per_learner
        .first()
        .ok_or_else(|| Error::Arity("ensemble bound needs at least one learner".into()))?;
    let params = per_learner.iter().skip(1).fold(*first, |acc, p| BoundParams {
        y_max: acc.y_max.max(p.y_max),
        d_max: acc.d_max.max(p.d_max),
        batch: acc.batch.max(p.batch),
        dim: acc.dim.max(p.dim),
        horizon: acc.horizon.max(p.horizon),
        lambda: acc.lambda.min(p.lambda),
        amplification: acc.amplification.min(p.amplification),
    });
    params.validate()?;
    Ok(EnsembleBound {
        params,
        ridge: ridge_bound(&params),
        forward: forward_bound(&params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iol::init_learner;
    use crate::linalg::vstack;
    use crate::stream::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rng: &mut crate::stream::StreamRng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| StandardNormal.sample(rng))
    }

    fn unit() -> BoundParams {
        BoundParams::new(1.0, 1.0, 1.0, 2.0, std::f64::consts::E - 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn immediate_regret_examples() {
        assert_eq!(immediate_regret(1.5, 1.0), 1.0);
        assert_eq!(immediate_regret(2.0, 2.0), 0.0);
    }

    #[test]
    fn ridge_term_examples() {
        let d = Mat::from_element(1, 1, 1.0);
        let eta = Mat::from_element(1, 1, 0.25);
        let beta = Mat::from_element(1, 1, 3.0);
        let y = Mat::from_element(1, 1, 1.0);
        assert!((regret_term_ridge(&d, &beta, &y, &eta) - 1.0).abs() < 1e-15);
        assert_eq!(regret_term_ridge(&d, &y, &y, &eta), 0.0);
    }

    #[test]
    fn forward_terms_vanish_without_signal() {
        let d = Mat::identity(2, 2);
        let t = regret_terms_forward(&d, &Mat::zeros(2, 1), &d, &Mat::zeros(2, 1), &d);
        assert_eq!((t.term1, t.term2), (0.0, 0.0));
    }

    #[test]
    fn bound_hand_values() {
        assert!((ridge_bound(&unit()) - 4.0).abs() < 1e-12);
        assert_eq!(ridge_bound_at(&unit(), 0.0), 0.0);
        let mut p = unit();
        p.horizon = 1.0;
        let f = forward_bound(&p);
        assert_eq!(f.full, f.single_log);
        assert!((f.single_log - 0.5 * 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn params_are_validated() {
        assert!(BoundParams::new(1.0, 1.0, 1.0, 1.0, 0.5, 1.0, 1.0).is_err());
        assert!(BoundParams::new(1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        let p = unit().with_batch_sizes(&[3, 9, 4]).unwrap();
        assert_eq!(p.batch, 9.0);
        assert_eq!(unit().with_batch_sizes(&[4]).unwrap().volume_scaled().amplification, 4.0);
    }

    #[test]
    fn ensemble_bound_extremes() {
        let a = unit();
        let single = ensemble_bound(&[a]).unwrap();
        assert_eq!(single.ridge, ridge_bound(&a));
        assert_eq!(ensemble_bound(&[a, a]).unwrap().ridge, ridge_bound(&a));
        let mut b = a;
        b.lambda = 0.1;
        let e = ensemble_bound(&[a, b]).unwrap();
        assert_eq!(e.params.lambda, 0.1);
        assert!(e.ridge >= ridge_bound(&a) && e.ridge >= ridge_bound(&b));
        assert!(ensemble_bound(&[]).is_err());
    }

    #[test]
    fn accumulator_matches_stacked_solution() {
        let mut rng = rng_from_seed(1);
        let ds: Vec<Mat> = (0..4).map(|_| randn(&mut rng, 3, 5)).collect();
        let ys: Vec<Mat> = (0..4).map(|_| randn(&mut rng, 3, 2)).collect();
        let mut acc = GramAccumulator::new(5, 2);
        for (d, y) in ds.iter().zip(&ys) {
            acc.absorb(d, y).unwrap();
        }
        let b0 = Mat::zeros(5, 2);
        let opt = acc.ridge_optimum(0.4, &b0).unwrap();
        let (dd, yy) = (vstack(&ds, 5), vstack(&ys, 2));
        let direct = crate::iol::offline_ridge_solve(&dd, &yy, 0.4).unwrap();
        assert!((&opt - direct).norm() < 1e-10);
        assert!((acc.data_loss(&opt) - batch_loss(&dd, &opt, &yy)).abs() < 1e-10);
    }

    fn run_ledger(style: Style, beta0: Mat, n: usize) -> (RegretLedger, Vec<Mat>, Vec<Mat>, Vec<Mat>, Vec<Mat>) {
        let mut rng = rng_from_seed(2);
        let p = beta0.nrows();
        let ds: Vec<Mat> = (0..n).map(|_| randn(&mut rng, 3, p)).collect();
        let ys: Vec<Mat> = (0..n).map(|_| randn(&mut rng, 3, 1)).collect();
        let mut s = init_learner(0.6, p, 1, style, Some(beta0.clone())).unwrap();
        if style == Style::Forward {
            s = s.prime(&ds[0]).unwrap();
        }
        let mut ledger = RegretLedger::for_learner(&s, None).unwrap();
        let mut betas = vec![s.beta.clone()];
        let mut looks = Vec::new();
        for t in 0..n {
            let next = if t + 1 < n { &ds[t + 1] } else { &ds[t] };
            let after = s.step(&ds[t], &ys[t], Some(next)).unwrap();
            ledger.record(&s, &after, &ds[t], &ys[t], Some(next)).unwrap();
            looks.push(next.clone());
            betas.push(after.beta.clone());
            s = after;
        }
        (ledger, betas, ds, ys, looks)
    }

    #[test]
    fn ridge_identity_holds() {
        let b0 = Mat::from_column_slice(4, 1, &[0.3, -0.2, 0.1, 0.5]);
        let (ledger, betas, ds, ys, _) = run_ledger(Style::Ridge, b0.clone(), 6);
        let expert = ledger.accumulator.ridge_optimum(0.6, &b0).unwrap();
        let lhs = ledger.cumulative().unwrap();
        let rhs = ridge_telescoping(&betas, &ds, 0.6, &expert).unwrap();
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        let e = OfflineExpert {
            beta: expert,
            kind: ExpertKind::RidgeOptimum,
        };
        let direct = cumulative_regret(&ledger, &e, &vstack(&ds, 4), &vstack(&ys, 1), RegretVariant::Regularized).unwrap();
        assert!((direct - lhs).abs() < 1e-9);
        let sum: f64 = ledger.steps.iter().map(|s| s.relative_regret).sum();
        assert!((sum - lhs).abs() < 1e-9);
    }

    #[test]
    fn forward_identity_holds() {
        for b0 in [Mat::zeros(4, 1), Mat::from_column_slice(4, 1, &[0.3, -0.2, 0.1, 0.5])] {
            let (ledger, betas, ds, _, looks) = run_ledger(Style::Forward, b0.clone(), 6);
            let expert = ledger.accumulator.ridge_optimum(0.6, &b0).unwrap();
            let lhs = ledger.cumulative().unwrap();
            let rhs = forward_telescoping(&betas, &ds, &looks, 0.6, &b0, &expert).unwrap();
            assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn single_batch_replay_is_bregman_residual() {
        let mut rng = rng_from_seed(9);
        let d = randn(&mut rng, 4, 3);
        let y = randn(&mut rng, 4, 1);
        let s = init_learner(0.8, 3, 1, Style::Ridge, None).unwrap();
        let after = s.ridge_step(&d, &y).unwrap();
        let mut ledger = RegretLedger::for_learner(&s, None).unwrap();
        ledger.record(&s, &after, &d, &y, None).unwrap();
        let mut h = d.transpose() * &d;
        for i in 0..3 {
            h[(i, i)] += 0.8;
        }
        let delta = &s.beta - &after.beta;
        let dense = 0.5 * (delta.transpose() * h * &delta)[(0, 0)];
        assert!((ledger.cumulative().unwrap() - dense).abs() < 1e-10);
    }

    #[test]
    fn zero_stream_has_zero_regret() {
        let d = Mat::identity(2, 2);
        let y = Mat::zeros(2, 1);
        let s = init_learner(1.0, 2, 1, Style::Ridge, None).unwrap();
        let after = s.ridge_step(&d, &y).unwrap();
        let mut ledger = RegretLedger::for_learner(&s, None).unwrap();
        ledger.record(&s, &after, &d, &y, None).unwrap();
        assert_eq!(ledger.cumulative(), Some(0.0));
    }

    #[test]
    fn oracle_expert_rejects_regularized_variant() {
        let ledger = RegretLedger::new(Style::Ridge, 1.0, Mat::zeros(2, 1), None).unwrap();
        let e = OfflineExpert {
            beta: Mat::zeros(2, 1),
            kind: ExpertKind::Oracle,
        };
        let d = Mat::zeros(1, 2);
        let y = Mat::zeros(1, 1);
        assert!(matches!(
            cumulative_regret(&ledger, &e, &d, &y, RegretVariant::Regularized),
            Err(Error::Usage(_))
        ));
        assert!(cumulative_regret(&ledger, &e, &d, &y, RegretVariant::Unregularized).is_ok());
    }

    #[test]
    fn ledger_maxima_and_clipping() {
        let s = init_learner(1.0, 1, 1, Style::Ridge, Some(Mat::from_element(1, 1, 10.0))).unwrap();
        let mut ledger = RegretLedger::for_learner(&s, None).unwrap();
        let d = Mat::from_element(1, 1, 2.0);
        let y = Mat::from_element(1, 1, 1.0);
        let after = s.ridge_step(&d, &y).unwrap();
        let step = ledger.record(&s, &after, &d, &y, None).unwrap().clone();
        assert_eq!(step.learner_loss, 0.5 * 19.0 * 19.0);
        assert_eq!(step.learner_loss_clipped, 0.0);
        assert_eq!((step.d_max, step.y_max), (2.0, 1.0));
        assert!(matches!(ledger.bound_params(1.0), Ok(p) if p.horizon == 1.0 && p.dim == 1.0));
    }
}
