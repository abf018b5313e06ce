//! Ground truth: exact fixed points of the expected updates, stability
//! diagnosis, the RMSE metric and Mountain Car evaluation sets.

mod eval;
mod fixed_point;

pub use eval::{rmse, rollout_true_values, sample_eval_states, EvalSet};
pub use fixed_point::{
    chain_fixed_point, continuing_fixed_point, stationary_distribution, AveragingOptions,
    ContinuingFixedPoint, FixedPointResult, MrpSpec, Stability, STABILITY_THRESHOLD,
};
