//! Incremental online learning for ensemble deep random vector functional
//! link (edRVFL) networks.
//!
//! Hidden weights are drawn once and frozen ([`features`]); each layer's
//! linear read-out is then learned from a stream of batches with exact
//! one-shot recursive updates under ridge or forward regularization
//! ([`iol`]). [`regret`] measures how far the online learners trail the
//! offline experts and evaluates the closed-form regret bounds, and
//! [`experiment`] drives simulations, dataset runs and ablations.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod features;
pub mod iol;
pub mod linalg;
pub mod regret;
pub mod stream;
pub mod tolerance;

pub use error::{Error, Result};
pub use features::{Activation, DirectFeatures, EdRvflConfig, EdRvflNetwork, EnsembleMode, FeatureMap, LayerFeatures};
pub use iol::{
    init_learner, offline_forward_solve, offline_ridge_solve, run_iol, smw_rate_update, EnsembleLearner, IolOptions,
    LearnerState, LookaheadPolicy, Style,
};
pub use linalg::Mat;
pub use regret::{BoundParams, RegretLedger};
pub use stream::{Batch, BatchStream, SyntheticConfig};
