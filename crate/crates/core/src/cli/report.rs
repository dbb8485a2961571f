use nalgebra::DVector;
use serde::Serialize;

use super::io::fmt_f64;
use crate::bias_correction::ObservedData;
use crate::linalg::sym_eigen;
use crate::pipeline::EstimateBundle;
use crate::refine::ActiveConstraint;
use crate::simulation::estimation_error;

#[derive(Debug, Serialize)]
pub struct CovarianceSummary {
    pub correction: &'static str,
    pub dim: usize,
    pub n_rows: usize,
    pub observed_fraction: f64,
    pub min_eigenvalue: Option<f64>,
    pub max_eigenvalue: Option<f64>,
    pub frobenius_norm: f64,
    pub indefinite: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct FantopeDiagnostics {
    pub mu: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub converged: bool,
    pub trace: f64,
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct InitialSection {
    pub u1: Vec<f64>,
    pub beta_init: Vec<f64>,
    pub trace_value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Serialize)]
pub struct RefinedSection {
    pub lambda: f64,
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub stationarity_gap: f64,
    pub objective: f64,
    pub active_constraints: Vec<ActiveConstraint>,
}

#[derive(Debug, Serialize)]
pub struct ErrorSection {
    pub initial: Option<f64>,
    pub refined: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub covariance: CovarianceSummary,
    pub fantope: FantopeDiagnostics,
    pub initial: InitialSection,
    pub refined: Option<RefinedSection>,
    pub errors: Option<ErrorSection>,
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

impl EstimateReport {
    pub fn new(bundle: &EstimateBundle, data: &ObservedData, truth: Option<&DVector<f64>>) -> Self {
        let spectrum = sym_eigen(&bundle.sigma.matrix).ok().map(|(vals, _)| vals);
        let min_eigenvalue = spectrum.as_ref().map(|v| v[v.len() - 1]);
        let covariance = CovarianceSummary {
            correction: bundle.sigma.spec.name(),
            dim: bundle.sigma.dim(),
            n_rows: data.n_rows(),
            observed_fraction: data.observed_fraction(),
            min_eigenvalue,
            max_eigenvalue: spectrum.as_ref().map(|v| v[0]),
            frobenius_norm: bundle.sigma.matrix.norm(),
            indefinite: min_eigenvalue.map(|m| m < 0.0),
        };
        let fantope = FantopeDiagnostics {
            mu: bundle.mu,
            iterations: bundle.fantope.iterations,
            primal_residual: bundle.fantope.primal_residual,
            dual_residual: bundle.fantope.dual_residual,
            objective: bundle.fantope.objective,
            converged: bundle.fantope.converged,
            trace: bundle.fantope.f.trace(),
            objective_trace: bundle.fantope.objective_trace.clone(),
        };
        let initial = InitialSection {
            u1: to_vec(&bundle.init.u1),
            beta_init: to_vec(&bundle.init.beta_init),
            trace_value: bundle.init.trace_value,
            degenerate: bundle.init.is_degenerate(),
        };
        let refined = bundle.refined.as_ref().map(|r| RefinedSection {
            lambda: bundle.lambda.unwrap_or(0.0),
            beta: to_vec(&r.beta),
            iterations: r.iterations,
            stationarity_gap: r.stationarity_gap,
            objective: r.objective,
            active_constraints: r.active_constraints.clone(),
        });
        let errors = truth.map(|t| ErrorSection {
            initial: estimation_error(&bundle.init.starting_point(), t).ok(),
            refined: bundle
                .refined
                .as_ref()
                .and_then(|r| estimation_error(&r.beta, t).ok()),
        });
        Self {
            covariance,
            fantope,
            initial,
            refined,
            errors,
        }
    }
}

/// One row per coordinate: `j,u1,beta_init[,beta_refined]`.
pub fn vectors_csv(bundle: &EstimateBundle) -> String {
    let mut out = String::from("j,u1,beta_init");
    if bundle.refined.is_some() {
        out.push_str(",beta_refined");
    }
    out.push('\n');
    for j in 0..bundle.init.u1.len() {
        out.push_str(&format!(
            "{j},{},{}",
            fmt_f64(bundle.init.u1[j]),
            fmt_f64(bundle.init.beta_init[j])
        ));
        if let Some(r) = &bundle.refined {
            out.push(',');
            out.push_str(&fmt_f64(r.beta[j]));
        }
        out.push('\n');
    }
    out
}
