//! Sparse leading-eigenvector estimation from data with missing or
//! multiplicatively corrupted entries.
//!
//! The estimation pipeline has four stages:
//!
//! 1. [`bias_correction`] builds an unbiased (possibly indefinite) surrogate
//!    covariance from the zero-filled observations.
//! 2. [`fantope`] solves the ℓ1-penalized Fantope relaxation with ADMM.
//! 3. [`spectral_init`] rescales the leading eigenvector of the relaxation
//!    into an initial estimate.
//! 4. [`refine`] runs projected proximal gradient on the penalized rank-one
//!    fit starting from that estimate.
//!
//! [`pipeline`] chains the stages, [`simulation`] generates synthetic data and
//! runs replication sweeps, and [`cli`] is the command-line front end.

pub mod bias_correction;
pub mod cli;
pub mod error;
pub mod fantope;
pub mod linalg;
pub mod pipeline;
pub mod refine;
pub mod selfcheck;
pub mod simulation;
pub mod spectral_init;
mod tridiag;

pub use bias_correction::{
    correct, correct_lowrank_additive, correct_multiplicative, correct_nonuniform,
    correct_uniform_missing, uncorrected_covariance, CorrectedCovariance, CorrectionSpec,
    GramScale, ObservedData, ScenarioTag,
};
pub use error::{Error, Result};
pub use fantope::{
    default_mu, project_fantope, soft_threshold, solve_fantope, FantopeProblem, FantopeSettings,
    FantopeSolution,
};
pub use pipeline::{default_lambda, estimate, EstimateBundle, EstimateSettings};
pub use refine::{
    objective_value, project_constraints, refine, risk_gradient, RefineConfig, RefinedEstimate,
    StepRule,
};
pub use simulation::{
    analytic_m, estimation_error, generate, run_sweep, EstimatorName, ResultRow, Scenario,
    ScenarioConfig, SpikedModel, SweepConfig, UDistribution,
};
pub use spectral_init::{leading_eigenvector, make_initial, InitialEstimate, SignConvention};
