//! Bayesian hyperparameter search over the block-network family.

pub mod bhs;
pub mod gp;
pub mod objective;
pub mod space;


pub use bhs::{
    bhs_run, check_exclusion, depth_sweep, halton, maximize, validate_config, BhsConfig,
    DepthSweep, Observation, Outcome, SearchTrace, SweepRow, Validation,
};
pub use gp::{expected_improvement, Gp, KernelParams, NOISE_FLOOR};
pub use objective::CnnObjective;
pub use space::{Dim, HyperparamSpace};

/// `-sum (x_i - c_i)^2` over the unit cube, maximal (0) at `c`.
pub fn toy_objective(x: &[f64], centre: &[f64]) -> f64 {
    -x.iter()
        .zip(centre)
        .map(|(a, c)| (a - c) * (a - c))
        .sum::<f64>()
}
