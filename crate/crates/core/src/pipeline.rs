//! The full estimator: correction → relaxation → initial estimate → refinement.

use nalgebra::DVector;
use serde::Serialize;

use crate::bias_correction::{correct, CorrectedCovariance, CorrectionSpec, GramScale, ObservedData};
use crate::error::Result;
use crate::fantope::{default_mu, solve_fantope, FantopeProblem, FantopeSettings, FantopeSolution};
use crate::refine::{refine, RefineConfig, RefinedEstimate};
use crate::spectral_init::{make_initial, InitialEstimate};

/// Tuning for [`estimate`]. `mu` and `lambda` override the data-driven
/// defaults `mu_scale·sqrt(log p / (δ² n))` and
/// `lambda_scale·sqrt(log p / (δ² n))·‖β_init‖₂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateSettings {
    pub mu: Option<f64>,
    pub mu_scale: f64,
    pub lambda: Option<f64>,
    pub lambda_scale: f64,
    pub fantope: FantopeSettings,
    /// `lambda` in here is ignored; see the fields above.
    pub refine: RefineConfig,
    pub skip_refine: bool,
}

impl Default for EstimateSettings {
    fn default() -> Self {
        Self {
            mu: None,
            mu_scale: 1.0,
            lambda: None,
            lambda_scale: DEFAULT_LAMBDA_SCALE,
            fantope: FantopeSettings::default(),
            refine: RefineConfig::default(),
            skip_refine: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateBundle {
    pub sigma: CorrectedCovariance,
    pub mu: f64,
    pub fantope: FantopeSolution,
    pub init: InitialEstimate,
    pub lambda: Option<f64>,
    pub refined: Option<RefinedEstimate>,
}

impl EstimateBundle {
    /// Refined estimate when available, else the initial one (or `u1` if
    /// the initial estimate is degenerate).
    pub fn final_estimate(&self) -> DVector<f64> {
        match &self.refined {
            Some(r) => r.beta.clone(),
            None => self.init.starting_point(),
        }
    }
}

/// Penalty base rate `sqrt(log p / (δ² n))`, multiplied by `n` when the
/// covariance is an unnormalized Gram matrix.
pub fn base_rate(sigma: &CorrectedCovariance, n: usize) -> f64 {
    let p = sigma.dim();
    let rate = default_mu(p, n, sigma.spec.effective_delta(), 1.0);
    match sigma.spec {
        CorrectionSpec::Lowrank {
            scale: GramScale::RawGram,
            ..
        } => rate * n as f64,
        _ => rate,
    }
}

/// Default multiplier in [`default_lambda`].
pub const DEFAULT_LAMBDA_SCALE: f64 = 0.8;

/// Refinement penalty `scale·rate·‖β_init‖₂²`.
///
/// Off the support the gradient noise is `(Σ̃β)_j`, whose spread is about
/// `rate·sqrt(βᵀΣβ)`, and `βᵀΣβ ≈ ‖β‖⁴` near a stationary point. Hence the
/// square rather than a single power of the norm.
pub fn default_lambda(sigma: &CorrectedCovariance, n: usize, init: &InitialEstimate, scale: f64) -> f64 {
    scale * base_rate(sigma, n) * init.starting_point().norm_squared()
}

/// Solves the relaxation and builds the initial estimate.
pub fn relax(
    sigma: &CorrectedCovariance,
    mu: f64,
    settings: &FantopeSettings,
) -> Result<(FantopeSolution, InitialEstimate)> {
    let problem = FantopeProblem::new(&sigma.matrix, mu).with_settings(*settings);
    let solution = solve_fantope(&problem)?;
    let init = make_initial(sigma, &solution)?;
    Ok((solution, init))
}

/// Runs the pipeline on an already-built covariance from `n` observations.
pub fn estimate_from_covariance(
    sigma: CorrectedCovariance,
    n: usize,
    settings: &EstimateSettings,
) -> Result<EstimateBundle> {
    let rate = base_rate(&sigma, n);
    let mu = settings.mu.unwrap_or(settings.mu_scale * rate);
    let (fantope, init) = relax(&sigma, mu, &settings.fantope)?;
    let (lambda, refined) = if settings.skip_refine {
        (None, None)
    } else {
        let lambda = settings
            .lambda
            .unwrap_or_else(|| default_lambda(&sigma, n, &init, settings.lambda_scale));
        let config = RefineConfig {
            lambda,
            ..settings.refine
        };
        (Some(lambda), Some(refine(&sigma, &init, &config)?))
    };
    Ok(EstimateBundle {
        sigma,
        mu,
        fantope,
        init,
        lambda,
        refined,
    })
}

pub fn estimate(
    data: &ObservedData,
    spec: &CorrectionSpec,
    settings: &EstimateSettings,
) -> Result<EstimateBundle> {
    let sigma = correct(data, spec)?;
    estimate_from_covariance(sigma, data.n_rows(), settings)
}
