//! Bias-corrected surrogate covariances for zero-filled observations.
//!
//! Missing entries are exact zeros in [`ObservedData`]. Every correction
//! returns a symmetric matrix that is unbiased for its target under the
//! matching corruption model; the result may be indefinite.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, symmetrize};

/// Corruption scenario the observations were produced under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioTag {
    Full,
    UniformMissing,
    Multiplicative,
    NonuniformMissing,
    LowrankAdditiveMissing,
}

impl ScenarioTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioTag::Full => "full",
            ScenarioTag::UniformMissing => "uniform_missing",
            ScenarioTag::Multiplicative => "multiplicative",
            ScenarioTag::NonuniformMissing => "nonuniform_missing",
            ScenarioTag::LowrankAdditiveMissing => "lowrank_additive_missing",
        }
    }
}

/// An `n × p` zero-filled observation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    values: DMatrix<f64>,
    scenario: ScenarioTag,
}

impl ObservedData {
    pub fn new(values: DMatrix<f64>, scenario: ScenarioTag) -> Result<Self> {
        if values.nrows() < 1 {
            return Err(Error::invalid("n_rows", "need at least one observation"));
        }
        if values.ncols() < 2 {
            return Err(Error::invalid("n_cols", "need at least two variables"));
        }
        if !all_finite(values.as_slice()) {
            return Err(Error::NonFinite("observed data"));
        }
        Ok(Self { values, scenario })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn scenario(&self) -> ScenarioTag {
        self.scenario
    }

    /// Fraction of entries that are not exactly zero.
    pub fn observed_fraction(&self) -> f64 {
        let nonzero = self.values.iter().filter(|v| **v != 0.0).count();
        nonzero as f64 / self.values.len() as f64
    }

    /// `YᵀY`, exactly symmetric.
    pub fn gram(&self) -> DMatrix<f64> {
        symmetrize(&self.values.tr_mul(&self.values))
    }

    /// `YᵀY / n`, exactly symmetric.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let mut g = self.gram();
        g /= self.n_rows() as f64;
        g
    }
}

/// Whether the low-rank correction targets `XᵀX` or `XᵀX / n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramScale {
    /// Divide the Gram matrix by `n`.
    #[default]
    MeanNormalized,
    /// Use `ỸᵀỸ` as is; the target is `XᵀX`.
    RawGram,
}

/// Which correction to apply, with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrectionSpec {
    None,
    UniformMissing {
        delta: f64,
    },
    Multiplicative {
        m: DMatrix<f64>,
    },
    Nonuniform {
        delta_vec: Vec<f64>,
    },
    /// `sigma_w` is the expected noise Gram contribution at the chosen
    /// scale: `E[WᵀW]` for [`GramScale::RawGram`], the per-row noise
    /// covariance for [`GramScale::MeanNormalized`].
    Lowrank {
        delta: f64,
        sigma_w: DMatrix<f64>,
        scale: GramScale,
    },
}

impl CorrectionSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CorrectionSpec::None => "none",
            CorrectionSpec::UniformMissing { .. } => "uniform_missing",
            CorrectionSpec::Multiplicative { .. } => "multiplicative",
            CorrectionSpec::Nonuniform { .. } => "nonuniform",
            CorrectionSpec::Lowrank { .. } => "lowrank",
        }
    }

    /// Checks parameter ranges. `p` is the data dimension when known.
    pub fn validate(&self, p: Option<usize>) -> Result<()> {
        match self {
            CorrectionSpec::None => Ok(()),
            CorrectionSpec::UniformMissing { delta } => check_probability("delta", *delta),
            CorrectionSpec::Multiplicative { m } => check_second_moment(m, p),
            CorrectionSpec::Nonuniform { delta_vec } => {
                if let Some(p) = p {
                    if delta_vec.len() != p {
                        return Err(Error::dims("delta_vec", p, delta_vec.len()));
                    }
                }
                delta_vec
                    .iter()
                    .try_for_each(|d| check_probability("delta_vec", *d))
            }
            CorrectionSpec::Lowrank { delta, sigma_w, .. } => {
                check_probability("delta", *delta)?;
                if sigma_w.nrows() != sigma_w.ncols() {
                    return Err(Error::dims(
                        "sigma_w",
                        "square matrix",
                        format!("{}x{}", sigma_w.nrows(), sigma_w.ncols()),
                    ));
                }
                if let Some(p) = p {
                    if sigma_w.nrows() != p {
                        return Err(Error::dims("sigma_w", p, sigma_w.nrows()));
                    }
                }
                if !all_finite(sigma_w.as_slice()) {
                    return Err(Error::NonFinite("sigma_w"));
                }
                check_symmetric("sigma_w", sigma_w)
            }
        }
    }

    /// Observation probability used to scale the default penalty. For
    /// second-moment corrections it is `sqrt(min_{i≠j} M_ij)`, which is the
    /// smallest pairwise observation rate for mask-type noise.
    pub fn effective_delta(&self) -> f64 {
        match self {
            CorrectionSpec::None => 1.0,
            CorrectionSpec::UniformMissing { delta } | CorrectionSpec::Lowrank { delta, .. } => {
                *delta
            }
            CorrectionSpec::Nonuniform { delta_vec } => {
                delta_vec.iter().copied().fold(1.0, f64::min)
            }
            CorrectionSpec::Multiplicative { m } => {
                let p = m.nrows();
                let mut min_off = f64::INFINITY;
                for j in 0..p {
                    for i in 0..p {
                        if i != j {
                            min_off = min_off.min(m[(i, j)]);
                        }
                    }
                }
                if min_off.is_finite() {
                    min_off.sqrt().min(1.0)
                } else {
                    1.0
                }
            }
        }
    }
}

/// A symmetric surrogate covariance together with how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedCovariance {
    pub matrix: DMatrix<f64>,
    pub spec: CorrectionSpec,
    pub min_eigenvalue_hint: Option<f64>,
}

impl CorrectedCovariance {
    /// Wraps an arbitrary square matrix, symmetrizing it.
    pub fn from_matrix(matrix: &DMatrix<f64>, spec: CorrectionSpec) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::dims(
                "covariance",
                "square matrix",
                format!("{}x{}", matrix.nrows(), matrix.ncols()),
            ));
        }
        if !all_finite(matrix.as_slice()) {
            return Err(Error::NonFinite("covariance"));
        }
        Ok(Self {
            matrix: symmetrize(matrix),
            spec,
            min_eigenvalue_hint: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

fn check_probability(name: &'static str, delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("observation probability must lie in (0, 1], got {delta}"),
        ))
    }
}

fn check_symmetric(name: &'static str, m: &DMatrix<f64>) -> Result<()> {
    let p = m.nrows();
    for j in 0..p {
        for i in (j + 1)..p {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                return Err(Error::invalid(name, format!("not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn check_second_moment(m: &DMatrix<f64>, p: Option<usize>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::dims(
            "M",
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    if let Some(p) = p {
        if m.nrows() != p {
            return Err(Error::dims("M", p, m.nrows()));
        }
    }
    if let Some(bad) = m.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::invalid(
            "M",
            format!("entries must be positive and finite, found {bad}"),
        ));
    }
    check_symmetric("M", m)
}

/// `(1/δ²)·S − ((1−δ)/δ²)·diag(S)` for a second-moment matrix `S`.
fn missing_data_adjust(s: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let inv_sq = 1.0 / (delta * delta);
    let diag_factor = (1.0 - delta) / (delta * delta);
    let mut out = s * inv_sq;
    for i in 0..s.nrows() {
        out[(i, i)] -= diag_factor * s[(i, i)];
    }
    out
}

/// Sparse-PCA correction for entries missing independently with
/// probability `1 − δ`.
pub fn correct_uniform_missing(data: &ObservedData, delta: f64) -> Result<CorrectedCovariance> {
    check_probability("delta", delta)?;
    let sigma = missing_data_adjust(&data.second_moment(), delta);
    Ok(CorrectedCovariance {
        matrix: symmetrize(&sigma),
        spec: CorrectionSpec::UniformMissing { delta },
        min_eigenvalue_hint: None,
    })
}

/// Element-wise division of `YᵀY/n` by the noise second-moment matrix `M`.
pub fn correct_multiplicative(data: &ObservedData, m: &DMatrix<f64>) -> Result<CorrectedCovariance> {
    check_second_moment(m, Some(data.n_cols()))?;
    let sigma = data.second_moment().component_div(m);
    Ok(CorrectedCovariance {
        matrix: symmetrize(&sigma),
        spec: CorrectionSpec::Multiplicative { m: m.clone() },
        min_eigenvalue_hint: None,
    })
}

/// Second-moment matrix of independent per-coordinate masks:
/// `M_ij = δ_i δ_j` off the diagonal and `δ_i` on it.
pub fn nonuniform_m(delta_vec: &[f64]) -> DMatrix<f64> {
    let p = delta_vec.len();
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            delta_vec[i]
        } else {
            delta_vec[i] * delta_vec[j]
        }
    })
}

/// Correction for coordinate `j` being observed with its own probability `δ_j`.
pub fn correct_nonuniform(data: &ObservedData, delta_vec: &[f64]) -> Result<CorrectedCovariance> {
    let spec = CorrectionSpec::Nonuniform {
        delta_vec: delta_vec.to_vec(),
    };
    spec.validate(Some(data.n_cols()))?;
    let mut out = correct_multiplicative(data, &nonuniform_m(delta_vec))?;
    out.spec = spec;
    Ok(out)
}

/// Correction for `Ỹ = mask ⊙ (X + W)` with known noise contribution
/// `sigma_w`; targets `XᵀX` (raw Gram) or `XᵀX/n` (mean-normalized).
pub fn correct_lowrank_additive(
    data: &ObservedData,
    delta: f64,
    sigma_w: &DMatrix<f64>,
    scale: GramScale,
) -> Result<CorrectedCovariance> {
    let spec = CorrectionSpec::Lowrank {
        delta,
        sigma_w: sigma_w.clone(),
        scale,
    };
    spec.validate(Some(data.n_cols()))?;
    let gram = match scale {
        GramScale::RawGram => data.gram(),
        GramScale::MeanNormalized => data.second_moment(),
    };
    let sigma = missing_data_adjust(&gram, delta) - sigma_w;
    Ok(CorrectedCovariance {
        matrix: symmetrize(&sigma),
        spec,
        min_eigenvalue_hint: None,
    })
}

/// The plain (biased) second-moment matrix `YᵀY/n`.
pub fn uncorrected_covariance(data: &ObservedData) -> CorrectedCovariance {
    CorrectedCovariance {
        matrix: data.second_moment(),
        spec: CorrectionSpec::None,
        min_eigenvalue_hint: None,
    }
}

/// Dispatches on `spec`.
pub fn correct(data: &ObservedData, spec: &CorrectionSpec) -> Result<CorrectedCovariance> {
    match spec {
        CorrectionSpec::None => Ok(uncorrected_covariance(data)),
        CorrectionSpec::UniformMissing { delta } => correct_uniform_missing(data, *delta),
        CorrectionSpec::Multiplicative { m } => correct_multiplicative(data, m),
        CorrectionSpec::Nonuniform { delta_vec } => correct_nonuniform(data, delta_vec),
        CorrectionSpec::Lowrank {
            delta,
            sigma_w,
            scale,
        } => correct_lowrank_additive(data, *delta, sigma_w, *scale),
    }
}
