//! ℓ1-penalized Fantope relaxation solved by ADMM.
//!
//! Maximizes `trace(ΣF) − μ‖F‖₁` over `{F : trace(F) = 1, 0 ⪯ F ⪯ I}` using
//! the splitting `F ∈ Fantope`, `G` carrying the ℓ1 term, `F = G`, with a
//! scaled dual variable `U`:
//!
//! ```text
//! F ← Π_Fantope(G − U + Σ/ρ)
//! G ← S_{μ/ρ}(F + U)
//! U ← U + F − G
//! ```

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, frobenius_inner, l1_norm, sym_eigen, symmetrize};
use crate::tridiag;

/// Scalar proximal map of `κ|·|`.
#[inline]
pub fn shrink(x: f64, kappa: f64) -> f64 {
    if x > kappa {
        x - kappa
    } else if x < -kappa {
        x + kappa
    } else {
        0.0
    }
}

/// Element-wise soft-thresholding `sign(a)·max(|a| − κ, 0)`.
pub fn soft_threshold(a: &DMatrix<f64>, kappa: f64) -> DMatrix<f64> {
    a.map(|x| shrink(x, kappa))
}

/// Shift `θ` solving `Σ_i clamp(λ_i − θ, 0, 1) = 1`, found by bisection on
/// `[λ_min − 1, λ_max]`. Requires at least one eigenvalue.
pub fn capped_simplex_shift(eigenvalues: &[f64]) -> f64 {
    let capped_sum = |theta: f64| -> f64 {
        eigenvalues
            .iter()
            .map(|&l| (l - theta).clamp(0.0, 1.0))
            .sum()
    };
    let max = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    // sum(lo) = p ≥ 1 and sum(hi) = 0.
    let mut lo = min - 1.0;
    let mut hi = max;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = capped_sum(mid);
        if (s - 1.0).abs() <= 1e-12 {
            return mid;
        }
        if s > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Euclidean projection of a symmetric matrix onto the rank-one Fantope.
///
/// Diagonalizes `A = QΛQᵀ` and returns `QΓQᵀ` with
/// `Γ_ii = clamp(λ_i − θ, 0, 1)`, `θ` from [`capped_simplex_shift`].
pub fn project_fantope(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(project_fantope_parts(a)?.0)
}

/// Projection plus the projected eigenvalues (descending; zero weights may be
/// omitted for large inputs).
pub(crate) fn project_fantope_parts(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if a.nrows() != a.ncols() {
        return Err(Error::dims(
            "fantope projection",
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    if !all_finite(a.as_slice()) {
        return Err(Error::NonFinite("matrix passed to fantope projection"));
    }
    // Only eigenpairs above the shift get weight, so large inputs skip the
    // rest of the spectrum.
    let partial = if a.nrows() >= tridiag::MIN_DIM {
        tridiag::fantope_eigenpairs(a)
    } else {
        None
    };
    let (values, vectors) = match partial {
        Some(pairs) => pairs,
        None => sym_eigen(a)?,
    };
    let theta = capped_simplex_shift(values.as_slice());
    let gamma = values.map(|l| (l - theta).clamp(0.0, 1.0));
    let p = a.nrows();
    let mut out = DMatrix::zeros(p, p);
    for (k, &g) in gamma.iter().enumerate() {
        if g > 0.0 {
            let q = vectors.column(k);
            out.ger(g, &q, &q, 1.0);
        }
    }
    Ok((symmetrize(&out), gamma))
}

/// Practical penalty level `scale·sqrt(log p / (δ² n))`.
pub fn default_mu(p: usize, n: usize, delta: f64, scale: f64) -> f64 {
    scale * ((p as f64).ln() / (delta * delta * n as f64)).sqrt()
}

/// ADMM tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FantopeSettings {
    pub rho: f64,
    pub max_iter: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
}

impl Default for FantopeSettings {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iter: 2000,
            tol_abs: 1e-6,
            tol_rel: 1e-5,
        }
    }
}

impl FantopeSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::invalid("rho", format!("must be positive, got {}", self.rho)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be positive"));
        }
        if !(self.tol_abs > 0.0 && self.tol_rel > 0.0) {
            return Err(Error::invalid("tol_abs/tol_rel", "tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FantopeProblem<'a> {
    pub sigma: &'a DMatrix<f64>,
    pub mu: f64,
    pub settings: FantopeSettings,
}

impl<'a> FantopeProblem<'a> {
    pub fn new(sigma: &'a DMatrix<f64>, mu: f64) -> Self {
        Self {
            sigma,
            mu,
            settings: FantopeSettings::default(),
        }
    }

    pub fn with_settings(mut self, settings: FantopeSettings) -> Self {
        self.settings = settings;
        self
    }
}

#[derive(Debug, Clone)]
pub struct FantopeSolution {
    /// Final projected iterate; exactly Fantope-feasible up to rounding.
    pub f: DMatrix<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `−trace(ΣF) + μ‖F‖₁` at the reported `F`.
    pub objective: f64,
    pub converged: bool,
    /// Objective at each projected iterate.
    pub objective_trace: Vec<f64>,
}

/// `−trace(ΣF) + μ‖F‖₁` for symmetric `F`.
pub fn fantope_objective(sigma: &DMatrix<f64>, f: &DMatrix<f64>, mu: f64) -> f64 {
    -frobenius_inner(sigma, f) + mu * l1_norm(f.as_slice())
}

pub fn solve_fantope(problem: &FantopeProblem<'_>) -> Result<FantopeSolution> {
    let sigma = problem.sigma;
    let p = sigma.nrows();
    if p != sigma.ncols() {
        return Err(Error::dims(
            "fantope problem",
            "square matrix",
            format!("{}x{}", sigma.nrows(), sigma.ncols()),
        ));
    }
    if p < 2 {
        return Err(Error::invalid("sigma", "dimension must be at least 2"));
    }
    if !all_finite(sigma.as_slice()) {
        return Err(Error::NonFinite("sigma"));
    }
    if !(problem.mu.is_finite() && problem.mu >= 0.0) {
        return Err(Error::invalid("mu", format!("must be nonnegative, got {}", problem.mu)));
    }
    let settings = problem.settings;
    settings.validate()?;

    let rho = settings.rho;
    let kappa = problem.mu / rho;
    let scaled_sigma = sigma / rho;
    let eps_scale = settings.tol_abs * p as f64;

    let mut g = DMatrix::zeros(p, p);
    let mut u = DMatrix::zeros(p, p);
    let mut f = DMatrix::zeros(p, p);
    let mut objective_trace = Vec::new();
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iter {
        iterations += 1;
        let target = &g - &u + &scaled_sigma;
        f = project_fantope(&target)?;
        let g_prev = std::mem::replace(&mut g, soft_threshold(&(&f + &u), kappa));
        u += &f - &g;

        objective_trace.push(fantope_objective(sigma, &f, problem.mu));

        primal = (&f - &g).norm();
        dual = rho * (&g - &g_prev).norm();
        let eps_primal = eps_scale + settings.tol_rel * f.norm().max(g.norm());
        let eps_dual = eps_scale + settings.tol_rel * rho * u.norm();
        if primal <= eps_primal && dual <= eps_dual {
            converged = true;
            break;
        }
    }

    let objective = fantope_objective(sigma, &f, problem.mu);
    Ok(FantopeSolution {
        f,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        objective,
        converged,
        objective_trace,
    })
}
