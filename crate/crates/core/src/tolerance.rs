//! Numerical tolerances shared by tests, acceptance checks and runtime guards.

/// Incremental vs offline weight agreement (relative Frobenius).
pub const EQUIVALENCE: f64 = 1e-8;
/// Recursive learning rate vs direct inversion (Frobenius).
pub const LEARNING_RATE: f64 = 1e-9;
/// Woodbury update vs dense inverse (Frobenius).
pub const SMW: f64 = 1e-10;
/// Symmetry drift of the learning rate after an update.
pub const SYMMETRY: f64 = 1e-12;
/// Primal vs dual ridge solution agreement (Frobenius).
pub const PRIMAL_DUAL: f64 = 1e-9;
/// Reciprocal condition estimate of the inner `b x b` system below which a
/// warning is logged.
pub const INNER_RCOND_WARN: f64 = 1e-12;
/// Softmax-ensemble row sums.
pub const PROBABILITY_SUM: f64 = 1e-12;
/// Normalize/inverse-transform round trip, per entry.
pub const NORMALIZATION_ROUND_TRIP: f64 = 1e-10;
