//! Projected proximal-gradient refinement of the penalized rank-one fit
//!
//! ```text
//! minimize  (1/4)‖Σ − ββᵀ‖_F² + λ‖β‖₁   subject to ‖β‖₁ ≤ Q, ‖β − c‖₂ ≤ η
//! ```
//!
//! One step is `β⁺ = P_C(S_{tλ}(β − t∇R(β)))`: soft-thresholding followed by
//! projection onto the constraint set. When a constraint is active this
//! composite map is not the exact proximal operator of the sum; stationarity
//! is measured as the fixed-point residual of this map.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bias_correction::CorrectedCovariance;
use crate::error::{Error, Result};
use crate::fantope::shrink;
use crate::linalg::l1_norm;
use crate::spectral_init::InitialEstimate;

const SUFFICIENT_DECREASE: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 100;
const DYKSTRA_TOL: f64 = 1e-10;
const DYKSTRA_ROUNDS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StepRule {
    /// Backtracking line search. `initial_step = None` uses
    /// `1 / (3‖β_init‖² + ‖Σ‖_F)`.
    Backtracking {
        beta_shrink: f64,
        initial_step: Option<f64>,
    },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Backtracking {
            beta_shrink: 0.5,
            initial_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefineConfig {
    pub lambda: f64,
    /// ℓ1 budget `Q`; `f64::INFINITY` disables it.
    pub q_bound: f64,
    /// ℓ2 radius `η` around the starting point; `f64::INFINITY` disables it.
    pub ball_radius: f64,
    pub max_iter: usize,
    pub step_rule: StepRule,
    pub stat_tol: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            q_bound: f64::INFINITY,
            ball_radius: f64::INFINITY,
            max_iter: 5000,
            step_rule: StepRule::default(),
            stat_tol: 1e-8,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("lambda", format!("must be nonnegative, got {}", self.lambda)));
        }
        if !(self.q_bound > 0.0) {
            return Err(Error::invalid("q_bound", "must be positive"));
        }
        if !(self.ball_radius > 0.0) {
            return Err(Error::invalid("ball_radius", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be positive"));
        }
        if !(self.stat_tol > 0.0) {
            return Err(Error::invalid("stat_tol", "must be positive"));
        }
        let StepRule::Backtracking {
            beta_shrink,
            initial_step,
        } = self.step_rule;
        if !(beta_shrink > 0.0 && beta_shrink < 1.0) {
            return Err(Error::invalid("beta_shrink", "must lie in (0, 1)"));
        }
        if let Some(t) = initial_step {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid("initial_step", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveConstraint {
    L1Ball,
    L2Ball,
}

#[derive(Debug, Clone)]
pub struct RefinedEstimate {
    pub beta: DVector<f64>,
    pub iterations: usize,
    /// `‖β − ProxStep(β)‖₂` at the reported iterate and final step size.
    pub stationarity_gap: f64,
    pub objective: f64,
    pub step_size: f64,
    pub active_constraints: Vec<ActiveConstraint>,
    /// Objective after each accepted step, starting with the initial point.
    pub objective_history: Vec<f64>,
}

fn check_dims(sigma: &DMatrix<f64>, beta: &DVector<f64>, context: &'static str) -> Result<()> {
    if sigma.nrows() != sigma.ncols() || sigma.nrows() != beta.len() {
        return Err(Error::dims(
            context,
            format!("{0}x{0} matrix and length-{0} vector", beta.len()),
            format!("{}x{}", sigma.nrows(), sigma.ncols()),
        ));
    }
    Ok(())
}

/// `∇R(β) = ‖β‖₂²·β − Σβ` for `R(β) = (1/4)‖Σ − ββᵀ‖_F²` with symmetric `Σ`.
pub fn risk_gradient(sigma: &CorrectedCovariance, beta: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(&sigma.matrix, beta, "risk gradient")?;
    Ok(gradient(&sigma.matrix, beta))
}

fn gradient(sigma: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
    beta * beta.norm_squared() - sigma * beta
}

/// `(1/4)‖Σ − ββᵀ‖_F² + λ‖β‖₁`, evaluated as
/// `(1/4)(‖Σ‖_F² − 2βᵀΣβ + ‖β‖₂⁴) + λ‖β‖₁`.
pub fn objective_value(sigma: &CorrectedCovariance, beta: &DVector<f64>, lambda: f64) -> Result<f64> {
    check_dims(&sigma.matrix, beta, "objective")?;
    Ok(objective_with_norm(&sigma.matrix, sigma.matrix.norm_squared(), beta, lambda))
}

fn objective_with_norm(sigma: &DMatrix<f64>, sigma_fro_sq: f64, beta: &DVector<f64>, lambda: f64) -> f64 {
    let quad = beta.dot(&(sigma * beta));
    let b2 = beta.norm_squared();
    0.25 * (sigma_fro_sq - 2.0 * quad + b2 * b2) + lambda * l1_norm(beta.as_slice())
}

/// Euclidean projection onto `{‖β‖₁ ≤ radius}` (sort-based simplex
/// projection of the magnitudes).
pub fn project_l1_ball(beta: &DVector<f64>, radius: f64) -> DVector<f64> {
    if !radius.is_finite() || l1_norm(beta.as_slice()) <= radius {
        return beta.clone();
    }
    let mut mags: Vec<f64> = beta.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cumulative += m;
        let candidate = (cumulative - radius) / (k + 1) as f64;
        if m > candidate {
            tau = candidate;
        } else {
            break;
        }
    }
    beta.map(|v| shrink(v, tau))
}

/// Euclidean projection onto `{‖β − center‖₂ ≤ radius}`.
pub fn project_l2_ball(beta: &DVector<f64>, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    if !radius.is_finite() {
        return beta.clone();
    }
    let offset = beta - center;
    let dist = offset.norm();
    if dist <= radius {
        beta.clone()
    } else {
        center + offset * (radius / dist)
    }
}

/// Euclidean projection onto the intersection of the ℓ1 ball of radius
/// `q_bound` and the ℓ2 ball of radius `ball_radius` around `center`, by
/// Dykstra's alternating projections. Infinite radii drop that constraint.
pub fn project_constraints(
    beta: &DVector<f64>,
    center: &DVector<f64>,
    q_bound: f64,
    ball_radius: f64,
) -> DVector<f64> {
    match (q_bound.is_finite(), ball_radius.is_finite()) {
        (false, false) => beta.clone(),
        (true, false) => project_l1_ball(beta, q_bound),
        (false, true) => project_l2_ball(beta, center, ball_radius),
        (true, true) => {
            let p = beta.len();
            let mut x = beta.clone();
            let mut inc_l1 = DVector::zeros(p);
            let mut inc_l2 = DVector::zeros(p);
            for _ in 0..DYKSTRA_ROUNDS {
                let y = project_l1_ball(&(&x + &inc_l1), q_bound);
                inc_l1 = &x + &inc_l1 - &y;
                let next = project_l2_ball(&(&y + &inc_l2), center, ball_radius);
                inc_l2 = &y + &inc_l2 - &next;
                let change = (&next - &x).norm();
                x = next;
                if change <= DYKSTRA_TOL {
                    break;
                }
            }
            x
        }
    }
}

struct Stepper<'a> {
    sigma: &'a DMatrix<f64>,
    sigma_fro_sq: f64,
    center: DVector<f64>,
    config: &'a RefineConfig,
}

impl Stepper<'_> {
    fn objective(&self, beta: &DVector<f64>) -> f64 {
        objective_with_norm(self.sigma, self.sigma_fro_sq, beta, self.config.lambda)
    }

    fn project(&self, beta: &DVector<f64>) -> DVector<f64> {
        project_constraints(beta, &self.center, self.config.q_bound, self.config.ball_radius)
    }

    fn prox_step(&self, beta: &DVector<f64>, grad: &DVector<f64>, t: f64) -> DVector<f64> {
        let kappa = t * self.config.lambda;
        let moved = (beta - grad * t).map(|v| shrink(v, kappa));
        self.project(&moved)
    }
}

/// Runs projected proximal gradient from `init.starting_point()`; the ℓ2 ball
/// is centered there.
pub fn refine(
    sigma: &CorrectedCovariance,
    init: &InitialEstimate,
    config: &RefineConfig,
) -> Result<RefinedEstimate> {
    refine_from(&sigma.matrix, &init.starting_point(), config)
}

/// [`refine`] from an explicit starting vector.
pub fn refine_from(
    sigma: &DMatrix<f64>,
    start: &DVector<f64>,
    config: &RefineConfig,
) -> Result<RefinedEstimate> {
    check_dims(sigma, start, "refine")?;
    config.validate()?;
    if config.q_bound.is_finite() && config.ball_radius.is_finite() {
        // The ball around `start` meets the ℓ1 ball iff it contains the
        // nearest point of the ℓ1 ball.
        let distance = (project_l1_ball(start, config.q_bound) - start).norm();
        if distance > config.ball_radius {
            return Err(Error::invalid(
                "ball_radius",
                format!(
                    "the ball of radius {} around the start misses the ℓ1 ball of radius {} (distance {distance:.3e})",
                    config.ball_radius, config.q_bound
                ),
            ));
        }
    }
    let StepRule::Backtracking {
        beta_shrink,
        initial_step,
    } = config.step_rule;

    let sigma_fro_sq = sigma.norm_squared();
    let stepper = Stepper {
        sigma,
        sigma_fro_sq,
        center: start.clone(),
        config,
    };
    let mut t = initial_step
        .unwrap_or_else(|| 1.0 / (3.0 * start.norm_squared() + sigma_fro_sq.sqrt() + 1e-12));

    let mut beta = stepper.project(start);
    let mut objective = stepper.objective(&beta);
    if !objective.is_finite() {
        return Err(Error::Divergence { iterations: 0 });
    }
    let mut history = vec![objective];
    let mut iterations = 0;
    let mut gap;

    loop {
        let grad = gradient(sigma, &beta);
        let mut candidate = stepper.prox_step(&beta, &grad, t);
        gap = (&candidate - &beta).norm();
        if gap <= config.stat_tol * (1.0 + beta.norm()) || iterations >= config.max_iter {
            break;
        }

        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let cand_obj = stepper.objective(&candidate);
            let step_sq = (&candidate - &beta).norm_squared();
            if cand_obj.is_finite() && cand_obj <= objective - SUFFICIENT_DECREASE / t * step_sq {
                objective = cand_obj;
                accepted = true;
                break;
            }
            t *= beta_shrink;
            candidate = stepper.prox_step(&beta, &grad, t);
        }
        if !accepted {
            if !stepper.objective(&candidate).is_finite() {
                return Err(Error::Divergence {
                    iterations: history.len(),
                });
            }
            // Step size collapsed without progress; report the current point.
            gap = (&candidate - &beta).norm();
            break;
        }
        beta = candidate;
        iterations += 1;
        history.push(objective);
    }

    let mut active = Vec::new();
    if config.q_bound.is_finite() && l1_norm(beta.as_slice()) >= config.q_bound - 1e-8 {
        active.push(ActiveConstraint::L1Ball);
    }
    if config.ball_radius.is_finite() && (&beta - start).norm() >= config.ball_radius - 1e-8 {
        active.push(ActiveConstraint::L2Ball);
    }

    Ok(RefinedEstimate {
        beta,
        iterations,
        stationarity_gap: gap,
        objective,
        step_size: t,
        active_constraints: active,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias_correction::CorrectionSpec;

    fn cov(m: DMatrix<f64>) -> CorrectedCovariance {
        CorrectedCovariance::from_matrix(&m, CorrectionSpec::None).unwrap()
    }

    fn beta0(p: usize) -> DVector<f64> {
        DVector::from_fn(p, |i, _| if i < 4 { 1.0 } else { 0.0 })
    }

    #[test]
    fn disjoint_constraints_rejected() {
        let start = DVector::from_vec(vec![2.0, -1.0]);
        let s = DMatrix::identity(2, 2);
        let tight = RefineConfig {
            q_bound: 1.0,
            ball_radius: 0.5,
            ..RefineConfig::default()
        };
        assert!(matches!(refine_from(&s, &start, &tight), Err(Error::InvalidParameter { name: "ball_radius", .. })));
        // Distance from the start to the unit ℓ1 ball is sqrt(2) · 1.
        let touching = RefineConfig {
            ball_radius: 1.5,
            ..tight
        };
        let out = refine_from(&s, &start, &touching).unwrap();
        assert!(out.beta.lp_norm(1) <= 1.0 + 1e-8);
    }

    #[test]
    fn gradient_vanishes_at_exact_fit_and_origin() {
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let s = cov(&b * b.transpose());
        assert!(risk_gradient(&s, &b).unwrap().norm() < 1e-14);
        let z = DVector::zeros(3);
        assert_eq!(risk_gradient(&s, &z).unwrap(), z);
    }

    #[test]
    fn gradient_dimension_mismatch() {
        let s = cov(DMatrix::identity(3, 3));
        assert!(risk_gradient(&s, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn objective_hand_values() {
        let s = cov(DMatrix::identity(2, 2));
        let b = DVector::from_vec(vec![1.0, 0.0]);
        assert!((objective_value(&s, &b, 0.5).unwrap() - 0.75).abs() < 1e-15);
        let z = DVector::zeros(2);
        assert!((objective_value(&s, &z, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let r = cov(&b * b.transpose());
        assert_eq!(objective_value(&r, &b, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn projections_hand_cases() {
        let b = DVector::from_vec(vec![3.0, 0.0]);
        let c = DVector::zeros(2);
        assert_eq!(project_constraints(&b, &c, f64::INFINITY, f64::INFINITY), b);
        let out = project_constraints(&b, &c, 1.0, f64::INFINITY);
        assert!((out - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-15);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let out = project_constraints(&b, &c, f64::INFINITY, 1.0);
        let h = 0.5f64.sqrt();
        assert!((out - DVector::from_vec(vec![h, h])).norm() < 1e-15);
    }

    #[test]
    fn l1_projection_matches_known_solution() {
        let b = DVector::from_vec(vec![0.8, -0.6, 0.1]);
        let out = project_l1_ball(&b, 1.0);
        // τ = 0.2: (0.6, −0.4, 0)
        assert!((out - DVector::from_vec(vec![0.6, -0.4, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn intersection_projection_is_feasible() {
        let b = DVector::from_vec(vec![2.0, -1.0, 0.5, 0.0]);
        let c = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let out = project_constraints(&b, &c, 1.2, 0.8);
        assert!(l1_norm(out.as_slice()) <= 1.2 + 1e-8);
        assert!((&out - &c).norm() <= 0.8 + 1e-8);
    }

    #[test]
    fn exact_fit_is_a_fixed_point() {
        let b = DVector::from_vec(vec![1.0, -0.5, 2.0, 0.0]);
        let s = b.clone() * b.transpose();
        let cfg = RefineConfig {
            q_bound: 10.0,
            ball_radius: 1.0,
            ..RefineConfig::default()
        };
        let out = refine_from(&s, &b, &cfg).unwrap();
        assert!(out.iterations <= 1);
        assert!(out.stationarity_gap <= 1e-12);
        assert!((&out.beta - &b).norm() < 1e-12);
    }

    #[test]
    fn unconstrained_spiked_converges_to_top_eigenpair() {
        let p = 12;
        let b = beta0(p);
        let sigma = &b * b.transpose() + DMatrix::identity(p, p);
        let mut start = &b * (5f64.sqrt() / 2.0);
        start[0] += 0.1;
        start[7] -= 0.05;
        let out = refine_from(&sigma, &start, &RefineConfig::default()).unwrap();
        assert!((out.beta.norm_squared() - 5.0).abs() < 1e-6);
        let cos = out.beta.dot(&b) / (out.beta.norm() * b.norm());
        assert!((cos.abs() - 1.0).abs() < 1e-10);
        assert!(out
            .objective_history
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn large_lambda_keeps_origin() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let cfg = RefineConfig {
            lambda: 10.0,
            ..RefineConfig::default()
        };
        let out = refine_from(&sigma, &DVector::zeros(2), &cfg).unwrap();
        assert_eq!(out.beta, DVector::zeros(2));
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn rejects_bad_config() {
        let sigma = DMatrix::identity(2, 2);
        let start = DVector::from_vec(vec![1.0, 0.0]);
        let cfg = RefineConfig {
            step_rule: StepRule::Backtracking {
                beta_shrink: 1.5,
                initial_step: None,
            },
            ..RefineConfig::default()
        };
        assert!(refine_from(&sigma, &start, &cfg).is_err());
        let cfg = RefineConfig {
            lambda: -1.0,
            ..RefineConfig::default()
        };
        assert!(refine_from(&sigma, &start, &cfg).is_err());
    }
}
