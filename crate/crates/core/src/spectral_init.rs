//! Initial estimate from the relaxation: the leading eigenvector of `F̂`
//! rescaled by `|trace(ΣF̂)|^{1/2}`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bias_correction::CorrectedCovariance;
use crate::error::{Error, Result};
use crate::fantope::FantopeSolution;
use crate::linalg::{fix_sign, frobenius_inner, sym_eigen};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    LargestAbsEntryPositive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialEstimate {
    pub u1: DVector<f64>,
    pub beta_init: DVector<f64>,
    /// `trace(ΣF̂)`, signed.
    pub trace_value: f64,
    pub sign_convention: SignConvention,
}

impl InitialEstimate {
    /// True when `trace(ΣF̂) = 0`, leaving a zero initializer.
    pub fn is_degenerate(&self) -> bool {
        self.trace_value == 0.0 || self.beta_init.iter().all(|v| *v == 0.0)
    }

    /// Starting point for refinement: `beta_init`, or `u1` when degenerate.
    pub fn starting_point(&self) -> DVector<f64> {
        if self.is_degenerate() {
            log::warn!("trace(ΣF̂) is zero; refinement starts from the unit eigenvector");
            self.u1.clone()
        } else {
            self.beta_init.clone()
        }
    }
}

/// Unit eigenvector of the algebraically largest eigenvalue, sign-fixed so
/// that its largest-magnitude entry is nonnegative.
pub fn leading_eigenvector(f: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    if f.nrows() != f.ncols() {
        return Err(Error::dims(
            "leading eigenvector",
            "square matrix",
            format!("{}x{}", f.nrows(), f.ncols()),
        ));
    }
    let (values, vectors) = sym_eigen(f)?;
    let mut u = vectors.column(0).into_owned();
    let norm = u.norm();
    if norm == 0.0 {
        return Err(Error::Eigendecomposition);
    }
    u /= norm;
    fix_sign(&mut u);
    Ok((u, values[0]))
}

pub fn make_initial(sigma: &CorrectedCovariance, f: &FantopeSolution) -> Result<InitialEstimate> {
    initial_from_matrix(&sigma.matrix, &f.f)
}

/// [`make_initial`] on bare matrices.
pub fn initial_from_matrix(sigma: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<InitialEstimate> {
    if sigma.shape() != f.shape() {
        return Err(Error::dims(
            "initial estimate",
            format!("{}x{}", sigma.nrows(), sigma.ncols()),
            format!("{}x{}", f.nrows(), f.ncols()),
        ));
    }
    let (u1, _) = leading_eigenvector(f)?;
    let trace_value = frobenius_inner(sigma, f);
    let beta_init = &u1 * trace_value.abs().sqrt();
    Ok(InitialEstimate {
        u1,
        beta_init,
        trace_value,
        sign_convention: SignConvention::LargestAbsEntryPositive,
    })
}
