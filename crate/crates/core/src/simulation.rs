//! Synthetic data for the four corruption scenarios, the projector-distance
//! error metric, and seeded replication sweeps.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias_correction::{
    correct, uncorrected_covariance, CorrectedCovariance, CorrectionSpec, GramScale,
    ObservedData, ScenarioTag,
};
use crate::error::{Error, Result};
use crate::fantope::default_mu;
use crate::pipeline::{base_rate, default_lambda, relax, EstimateSettings};
use crate::refine::{refine, RefineConfig};
use crate::spectral_init::{leading_eigenvector, InitialEstimate};

/// `Σ₀ = ω β⁰β⁰ᵀ + I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikedModel {
    pub p: usize,
    pub omega: f64,
    pub beta0: Vec<f64>,
}

impl SpikedModel {
    /// `β⁰ = (1, 1, 1, 1, 0, …, 0)`.
    pub fn new(p: usize, omega: f64) -> Self {
        let beta0 = (0..p).map(|i| if i < 4 { 1.0 } else { 0.0 }).collect();
        Self { p, omega, beta0 }
    }

    pub fn with_beta0(omega: f64, beta0: Vec<f64>) -> Self {
        Self {
            p: beta0.len(),
            omega,
            beta0,
        }
    }

    pub fn beta0(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta0)
    }

    pub fn sigma0(&self) -> DMatrix<f64> {
        let b = self.beta0();
        &b * b.transpose() * self.omega + DMatrix::identity(self.p, self.p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::invalid("p", "need at least two variables"));
        }
        if self.beta0.len() != self.p {
            return Err(Error::dims("beta0", self.p, self.beta0.len()));
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::invalid("omega", format!("must be nonnegative, got {}", self.omega)));
        }
        if !self.beta0.iter().all(|v| v.is_finite()) || self.beta0.iter().all(|v| *v == 0.0) {
            return Err(Error::invalid("beta0", "must be finite and nonzero"));
        }
        Ok(())
    }
}

/// Distribution of the i.i.d. multiplicative noise entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UDistribution {
    Bernoulli { delta: f64 },
    Uniform { a: f64, b: f64 },
}

impl UDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UDistribution::Bernoulli { delta } => {
                if delta > 0.0 && delta <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("delta", format!("must lie in (0, 1], got {delta}")))
                }
            }
            UDistribution::Uniform { a, b } => {
                if a.is_finite() && b.is_finite() && a > 0.0 && a <= b {
                    Ok(())
                } else {
                    Err(Error::invalid("uniform", format!("need 0 < a <= b, got a={a}, b={b}")))
                }
            }
        }
    }

    /// First and second moments.
    pub fn moments(&self) -> (f64, f64) {
        match *self {
            UDistribution::Bernoulli { delta } => (delta, delta),
            UDistribution::Uniform { a, b } => (0.5 * (a + b), (a * a + a * b + b * b) / 3.0),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        match *self {
            UDistribution::Bernoulli { delta } => {
                if u < delta {
                    1.0
                } else {
                    0.0
                }
            }
            UDistribution::Uniform { a, b } => a + (b - a) * u,
        }
    }

    fn label(&self) -> String {
        match *self {
            UDistribution::Bernoulli { delta } => format!("{delta:.2}"),
            UDistribution::Uniform { a, b } => format!("uniform({a},{b})"),
        }
    }
}

/// `M = E[U₁U₁ᵀ]` for i.i.d. noise entries: `m₁²` off the diagonal, `m₂` on it.
pub fn analytic_m(noise: &UDistribution, p: usize) -> Result<DMatrix<f64>> {
    noise.validate()?;
    let (m1, m2) = noise.moments();
    Ok(DMatrix::from_fn(p, p, |i, j| if i == j { m2 } else { m1 * m1 }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// `Y_ij = δ_ij X_ij` with `δ_ij ~ Bernoulli(δ)`.
    UniformMissing { delta: f64 },
    /// `Y = X ⊙ U`.
    Multiplicative { noise: UDistribution },
    /// Coordinate `j` observed with probability `δ_j`.
    NonuniformMissing { delta_vec: Vec<f64> },
    /// `Ỹ = mask ⊙ (X + W)` with fixed rank-one `X = √n·d₁·u vᵀ`,
    /// `v = β⁰/‖β⁰‖`, `d₁² = ω‖β⁰‖²` and `W_ij ~ N(0, noise_sd²)`. The
    /// left factor `u` is drawn once from `design_seed`.
    LowrankAdditiveMissing {
        delta: f64,
        noise_sd: f64,
        #[serde(default)]
        scale: GramScale,
        #[serde(default)]
        design_seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    pub model: SpikedModel,
    pub scenario: Scenario,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::invalid("n", "need at least one observation"));
        }
        self.model.validate()?;
        self.correction().validate(Some(self.model.p))?;
        match &self.scenario {
            Scenario::Multiplicative { noise } => noise.validate(),
            Scenario::LowrankAdditiveMissing { noise_sd, .. } => {
                if noise_sd.is_finite() && *noise_sd >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("noise_sd", "must be nonnegative"))
                }
            }
            _ => Ok(()),
        }
    }

    pub fn tag(&self) -> ScenarioTag {
        match self.scenario {
            Scenario::UniformMissing { .. } => ScenarioTag::UniformMissing,
            Scenario::Multiplicative { .. } => ScenarioTag::Multiplicative,
            Scenario::NonuniformMissing { .. } => ScenarioTag::NonuniformMissing,
            Scenario::LowrankAdditiveMissing { .. } => ScenarioTag::LowrankAdditiveMissing,
        }
    }

    /// The correction matching this scenario's corruption.
    pub fn correction(&self) -> CorrectionSpec {
        let p = self.model.p;
        match &self.scenario {
            Scenario::UniformMissing { delta } => CorrectionSpec::UniformMissing { delta: *delta },
            Scenario::Multiplicative { noise } => {
                let (m1, m2) = noise.moments();
                CorrectionSpec::Multiplicative {
                    m: DMatrix::from_fn(p, p, |i, j| if i == j { m2 } else { m1 * m1 }),
                }
            }
            Scenario::NonuniformMissing { delta_vec } => CorrectionSpec::Nonuniform {
                delta_vec: delta_vec.clone(),
            },
            Scenario::LowrankAdditiveMissing {
                delta,
                noise_sd,
                scale,
                ..
            } => {
                let per_row = noise_sd * noise_sd;
                let factor = match scale {
                    GramScale::RawGram => self.n as f64,
                    GramScale::MeanNormalized => 1.0,
                };
                CorrectionSpec::Lowrank {
                    delta: *delta,
                    sigma_w: DMatrix::identity(p, p) * (per_row * factor),
                    scale: *scale,
                }
            }
        }
    }

    /// What the matching correction is unbiased for: `Σ₀` for the sparse-PCA
    /// scenarios, `XᵀX` (or `XᵀX/n`) for the low-rank one.
    pub fn target(&self) -> DMatrix<f64> {
        match &self.scenario {
            Scenario::LowrankAdditiveMissing {
                scale, design_seed, ..
            } => {
                let x = self.lowrank_signal(*design_seed);
                let g = x.tr_mul(&x);
                match scale {
                    GramScale::RawGram => g,
                    GramScale::MeanNormalized => g / self.n as f64,
                }
            }
            _ => self.model.sigma0(),
        }
    }

    /// Unit direction the estimators should recover.
    pub fn truth(&self) -> DVector<f64> {
        let b = self.model.beta0();
        match self.scenario {
            Scenario::LowrankAdditiveMissing { .. } => &b / b.norm(),
            _ => b,
        }
    }

    pub fn delta_label(&self) -> String {
        match &self.scenario {
            Scenario::UniformMissing { delta } | Scenario::LowrankAdditiveMissing { delta, .. } => {
                format!("{delta:.2}")
            }
            Scenario::Multiplicative { noise } => noise.label(),
            Scenario::NonuniformMissing { delta_vec } => {
                let min = delta_vec.iter().copied().fold(1.0, f64::min);
                format!("min{min:.2}")
            }
        }
    }

    /// Copy with the observation probability replaced (Bernoulli noise for
    /// the multiplicative scenario). Unchanged for non-uniform masks.
    pub fn with_delta(&self, new_delta: f64) -> Self {
        let mut out = self.clone();
        match &mut out.scenario {
            Scenario::UniformMissing { delta } | Scenario::LowrankAdditiveMissing { delta, .. } => {
                *delta = new_delta
            }
            Scenario::Multiplicative { noise } => {
                *noise = UDistribution::Bernoulli { delta: new_delta }
            }
            Scenario::NonuniformMissing { .. } => {}
        }
        out
    }

    pub fn with_omega(&self, omega: f64) -> Self {
        let mut out = self.clone();
        out.model.omega = omega;
        out
    }

    fn lowrank_signal(&self, design_seed: u64) -> DMatrix<f64> {
        let n = self.n;
        let mut rng = ChaCha8Rng::seed_from_u64(design_seed);
        let mut u = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = u.norm();
        if norm > 0.0 {
            u /= norm;
        }
        let b = self.model.beta0();
        let v = &b / b.norm();
        let d1 = (self.model.omega * b.norm_squared()).sqrt();
        &u * v.transpose() * ((n as f64).sqrt() * d1)
    }
}

/// One generated dataset.
#[derive(Debug, Clone)]
pub struct Draw {
    pub observed: ObservedData,
    /// Uncorrupted signal matrix (`X` before masks and noise).
    pub latent: DMatrix<f64>,
    pub truth: DVector<f64>,
}

fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, chol_lower: &DMatrix<f64>) -> DMatrix<f64> {
    let p = chol_lower.nrows();
    let z = DMatrix::from_fn(n, p, |_, _| 0.0);
    let mut z = z;
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    z * chol_lower.transpose()
}

/// Draws `X`, applies the scenario's corruption and returns every piece.
/// Deterministic per `(config, seed)`.
pub fn generate_draw(config: &ScenarioConfig, seed: u64) -> Result<Draw> {
    config.validate()?;
    let n = config.n;
    let p = config.model.p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (latent, observed_values) = match &config.scenario {
        Scenario::LowrankAdditiveMissing {
            delta,
            noise_sd,
            design_seed,
            ..
        } => {
            let x = config.lowrank_signal(*design_seed);
            let mut y = x.clone();
            for i in 0..n {
                for j in 0..p {
                    let w: f64 = rng.sample(StandardNormal);
                    y[(i, j)] += noise_sd * w;
                }
            }
            apply_masks(&mut rng, &mut y, |_| *delta);
            (x, y)
        }
        other => {
            let chol = Cholesky::new(config.model.sigma0())
                .ok_or_else(|| Error::invalid("sigma0", "not positive definite"))?;
            let x = gaussian_rows(&mut rng, n, &chol.l());
            let mut y = x.clone();
            match other {
                Scenario::UniformMissing { delta } => apply_masks(&mut rng, &mut y, |_| *delta),
                Scenario::NonuniformMissing { delta_vec } => {
                    apply_masks(&mut rng, &mut y, |j| delta_vec[j])
                }
                Scenario::Multiplicative { noise } => {
                    for i in 0..n {
                        for j in 0..p {
                            y[(i, j)] *= noise.sample(&mut rng);
                        }
                    }
                }
                Scenario::LowrankAdditiveMissing { .. } => unreachable!(),
            }
            (x, y)
        }
    };

    Ok(Draw {
        observed: ObservedData::new(observed_values, config.tag())?,
        latent,
        truth: config.truth(),
    })
}

fn apply_masks(rng: &mut ChaCha8Rng, y: &mut DMatrix<f64>, prob: impl Fn(usize) -> f64) {
    for i in 0..y.nrows() {
        for j in 0..y.ncols() {
            let u: f64 = rng.random();
            if u >= prob(j) {
                y[(i, j)] = 0.0;
            }
        }
    }
}

/// Zero-filled observations and the true direction.
pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<(ObservedData, DVector<f64>)> {
    let draw = generate_draw(config, seed)?;
    Ok((draw.observed, draw.truth))
}

/// Unit vector along `v`, scaled first by its largest-magnitude entry. Each
/// quotient is correctly rounded, so exact multiples of one vector map to
/// bit-identical directions and their error is exactly zero.
fn canonical_direction(v: &DVector<f64>) -> DVector<f64> {
    let k = v.iamax();
    let scaled = v / v[k];
    let norm = scaled.norm();
    scaled / norm
}

/// `‖ββᵀ/‖β‖² − bbᵀ/‖b‖²‖_F`, computed as `‖β̂ − s·b̂‖₂·sqrt(1 + |c|)` with
/// unit vectors `β̂, b̂`, `c = β̂ᵀb̂` and `s = sign(c)`. This equals
/// `sqrt(2 − 2c²)` without its cancellation near `|c| = 1`.
pub fn estimation_error(beta_hat: &DVector<f64>, beta_true: &DVector<f64>) -> Result<f64> {
    if beta_hat.len() != beta_true.len() {
        return Err(Error::dims("estimation error", beta_true.len(), beta_hat.len()));
    }
    let na = beta_hat.norm();
    let nb = beta_true.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    if !(na.is_finite() && nb.is_finite()) {
        return Err(Error::NonFinite("estimation error input"));
    }
    let a = canonical_direction(beta_hat);
    let b = canonical_direction(beta_true);
    let c = a.dot(&b).clamp(-1.0, 1.0);
    let aligned = if c >= 0.0 { &a - &b } else { &a + &b };
    Ok(aligned.norm() * (1.0 + c.abs()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    /// Leading eigenvector of `YᵀY/n`, no sparsity.
    PcaOracleData,
    SdpCorrected,
    SdpUncorrected,
    /// Nonconvex refinement started from `sdp_corrected`.
    Refined,
}

impl EstimatorName {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorName::PcaOracleData => "pca_oracle_data",
            EstimatorName::SdpCorrected => "sdp_corrected",
            EstimatorName::SdpUncorrected => "sdp_uncorrected",
            EstimatorName::Refined => "refined",
        }
    }
}

impl std::str::FromStr for EstimatorName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca_oracle_data" => Ok(EstimatorName::PcaOracleData),
            "sdp_corrected" => Ok(EstimatorName::SdpCorrected),
            "sdp_uncorrected" => Ok(EstimatorName::SdpUncorrected),
            "refined" => Ok(EstimatorName::Refined),
            other => Err(Error::invalid("estimator", format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario: String,
    pub omega: f64,
    pub delta_label: String,
    pub replication_index: usize,
    pub estimator_name: EstimatorName,
    /// `NaN` when the estimator failed.
    pub error: f64,
    pub iterations: usize,
    pub runtime_ms: f64,
    pub seed: u64,
    #[serde(skip)]
    pub cell_index: usize,
    /// Entries with magnitude above `1e-6` in the estimate.
    #[serde(skip)]
    pub support_size: Option<usize>,
    #[serde(skip)]
    pub failure: Option<String>,
    /// FNV-1a digest of the observed matrix the estimator ran on.
    #[serde(skip)]
    pub data_digest: u64,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub cells: Vec<ScenarioConfig>,
    pub estimators: Vec<EstimatorName>,
    pub replications: usize,
    pub base_seed: u64,
    pub settings: EstimateSettings,
}

impl SweepConfig {
    /// Cells for every `(ω, δ)` pair, ω-major.
    pub fn grid(template: &ScenarioConfig, omegas: &[f64], deltas: &[f64]) -> Vec<ScenarioConfig> {
        omegas
            .iter()
            .flat_map(|&w| deltas.iter().map(move |&d| template.with_omega(w).with_delta(d)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications", "must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::invalid("estimators", "need at least one estimator"));
        }
        self.settings.fantope.validate()?;
        self.settings.refine.validate()?;
        self.cells.iter().try_for_each(ScenarioConfig::validate)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed for replication `rep` of grid cell `cell`.
pub fn derive_seed(base_seed: u64, cell: usize, rep: usize) -> u64 {
    let h = splitmix64(base_seed);
    let h = splitmix64(h ^ cell as u64);
    splitmix64(h ^ (rep as u64).rotate_left(32))
}

pub fn data_digest(data: &ObservedData) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in data.values().iter() {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

struct Relaxed {
    sigma: CorrectedCovariance,
    mu: f64,
    iterations: usize,
    init: InitialEstimate,
    runtime_ms: f64,
}

fn run_relaxation(sigma: CorrectedCovariance, mu: f64, settings: &EstimateSettings) -> Result<Relaxed> {
    let start = Instant::now();
    let (solution, init) = relax(&sigma, mu, &settings.fantope)?;
    Ok(Relaxed {
        sigma,
        mu,
        iterations: solution.iterations,
        init,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

struct Outcome {
    error: f64,
    iterations: usize,
    runtime_ms: f64,
    support_size: Option<usize>,
}

type Attempt<T> = std::result::Result<T, String>;

fn support(beta: &DVector<f64>) -> usize {
    beta.iter().filter(|v| v.abs() > 1e-6).count()
}

fn relaxed_outcome(r: &Attempt<Relaxed>, truth: &DVector<f64>) -> Attempt<Outcome> {
    let r = r.as_ref().map_err(Clone::clone)?;
    let error = estimation_error(&r.init.starting_point(), truth).map_err(|e| e.to_string())?;
    Ok(Outcome {
        error,
        iterations: r.iterations,
        runtime_ms: r.runtime_ms,
        support_size: Some(support(&r.init.u1)),
    })
}

fn refined_outcome(
    r: &Attempt<Relaxed>,
    truth: &DVector<f64>,
    n: usize,
    settings: &EstimateSettings,
) -> Attempt<Outcome> {
    let r = r.as_ref().map_err(Clone::clone)?;
    let start = Instant::now();
    let lambda = settings
        .lambda
        .unwrap_or_else(|| default_lambda(&r.sigma, n, &r.init, settings.lambda_scale));
    let cfg = RefineConfig {
        lambda,
        ..settings.refine
    };
    let out = refine(&r.sigma, &r.init, &cfg).map_err(|e| e.to_string())?;
    let error = estimation_error(&out.beta, truth).map_err(|e| e.to_string())?;
    Ok(Outcome {
        error,
        iterations: out.iterations,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        support_size: Some(support(&out.beta)),
    })
}

fn replicate(config: &SweepConfig, cell_index: usize, rep: usize) -> Vec<ResultRow> {
    let cell = &config.cells[cell_index];
    let seed = derive_seed(config.base_seed, cell_index, rep);
    let row = |name: EstimatorName, outcome: Attempt<Outcome>, digest: u64| {
        let (error, iterations, runtime_ms, support_size, failure) = match outcome {
            Ok(o) => (o.error, o.iterations, o.runtime_ms, o.support_size, None),
            Err(e) => {
                log::warn!(
                    "cell {cell_index} replication {rep}: {} failed: {e}",
                    name.as_str()
                );
                (f64::NAN, 0, 0.0, None, Some(e))
            }
        };
        ResultRow {
            scenario: cell.tag().as_str().to_string(),
            omega: cell.model.omega,
            delta_label: cell.delta_label(),
            replication_index: rep,
            estimator_name: name,
            error,
            iterations,
            runtime_ms,
            seed,
            cell_index,
            support_size,
            failure,
            data_digest: digest,
        }
    };

    let (data, truth) = match generate(cell, seed) {
        Ok(d) => d,
        Err(e) => {
            return config
                .estimators
                .iter()
                .map(|&name| row(name, Err(e.to_string()), 0))
                .collect();
        }
    };
    let digest = data_digest(&data);
    let n = data.n_rows();
    let settings = &config.settings;
    let corrected_relaxation = || {
        correct(&data, &cell.correction())
            .and_then(|s| {
                let mu = settings.mu.unwrap_or(settings.mu_scale * base_rate(&s, n));
                run_relaxation(s, mu, settings)
            })
            .map_err(|e| e.to_string())
    };
    // The uncorrected relaxation gets the corrected one's penalty level for a
    // normalized covariance, so only the input matrix differs.
    let uncorrected_mu = settings.mu.unwrap_or(default_mu(
        data.n_cols(),
        n,
        cell.correction().effective_delta(),
        settings.mu_scale,
    ));

    let mut corrected: Option<Attempt<Relaxed>> = None;
    let mut rows = Vec::with_capacity(config.estimators.len());
    for &name in &config.estimators {
        let outcome = match name {
            EstimatorName::PcaOracleData => {
                let start = Instant::now();
                leading_eigenvector(&data.second_moment())
                    .and_then(|(u, _)| {
                        estimation_error(&u, &truth).map(|error| Outcome {
                            error,
                            iterations: 0,
                            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                            support_size: Some(support(&u)),
                        })
                    })
                    .map_err(|e| e.to_string())
            }
            EstimatorName::SdpCorrected => {
                relaxed_outcome(corrected.get_or_insert_with(corrected_relaxation), &truth)
            }
            EstimatorName::SdpUncorrected => {
                let sigma = uncorrected_covariance(&data);
                match &corrected {
                    // Identical input gives an identical solution.
                    Some(Ok(r)) if r.sigma.matrix == sigma.matrix && r.mu == uncorrected_mu => {
                        relaxed_outcome(corrected.as_ref().unwrap(), &truth)
                    }
                    _ => relaxed_outcome(
                        &run_relaxation(sigma, uncorrected_mu, settings).map_err(|e| e.to_string()),
                        &truth,
                    ),
                }
            }
            EstimatorName::Refined => refined_outcome(
                corrected.get_or_insert_with(corrected_relaxation),
                &truth,
                n,
                settings,
            ),
        };
        rows.push(row(name, outcome, digest));
    }
    rows
}

/// Runs every estimator on every `(cell, replication)` dataset. Rows come
/// back ordered by cell, replication, then estimator (in the configured
/// order) regardless of how work was scheduled. Estimator failures become
/// rows with `error = NaN`.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let units: Vec<(usize, usize)> = (0..config.cells.len())
        .flat_map(|c| (0..config.replications).map(move |r| (c, r)))
        .collect();
    let rows: Vec<Vec<ResultRow>> = units
        .par_iter()
        .map(|&(c, r)| replicate(config, c, r))
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize, p: usize, omega: f64, delta: f64) -> ScenarioConfig {
        ScenarioConfig {
            n,
            model: SpikedModel::new(p, omega),
            scenario: Scenario::UniformMissing { delta },
        }
    }

    #[test]
    fn spiked_model_top_eigenvalue() {
        let m = SpikedModel::new(20, 2.0);
        let (vals, _) = crate::linalg::sym_eigen(&m.sigma0()).unwrap();
        assert!((vals[0] - 9.0).abs() < 1e-10);
    }

    #[test]
    fn full_observation_returns_latent() {
        let cfg = uniform(6, 5, 1.0, 1.0);
        let draw = generate_draw(&cfg, 3).unwrap();
        assert_eq!(draw.observed.values(), &draw.latent);
        assert_eq!(draw.observed.observed_fraction(), 1.0);
        let corrected = correct(&draw.observed, &cfg.correction()).unwrap();
        let plain = uncorrected_covariance(&draw.observed);
        assert!(crate::linalg::max_abs_diff(&corrected.matrix, &plain.matrix) <= 1e-12);
    }

    #[test]
    fn observed_fraction_concentrates() {
        let cfg = uniform(200, 200, 1.0, 0.55);
        let (data, _) = generate(&cfg, 11).unwrap();
        assert!((data.observed_fraction() - 0.55).abs() < 0.01);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = uniform(10, 6, 0.5, 0.7);
        let (a, _) = generate(&cfg, 99).unwrap();
        let (b, _) = generate(&cfg, 99).unwrap();
        assert_eq!(a, b);
        let (c, _) = generate(&cfg, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_noise_rejected() {
        let cfg = ScenarioConfig {
            n: 4,
            model: SpikedModel::new(4, 1.0),
            scenario: Scenario::Multiplicative {
                noise: UDistribution::Uniform { a: -1.0, b: 1.0 },
            },
        };
        assert!(generate(&cfg, 0).is_err());
        assert!(generate(&uniform(4, 4, 1.0, 0.0), 0).is_err());
    }

    #[test]
    fn analytic_m_closed_forms() {
        let m = analytic_m(&UDistribution::Bernoulli { delta: 0.5 }, 2).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[0.5, 0.25, 0.25, 0.5]));
        let m = analytic_m(&UDistribution::Uniform { a: 1.0, b: 1.0 }, 3).unwrap();
        assert_eq!(m, DMatrix::from_element(3, 3, 1.0));
        let m = analytic_m(&UDistribution::Uniform { a: 0.5, b: 1.5 }, 2).unwrap();
        assert!((m[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((m[(0, 0)] - 13.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn error_metric_closed_forms() {
        let b = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        for c in [1.0, -1.0, 2.0, -0.5, 4.0] {
            assert_eq!(estimation_error(&(&b * c), &b).unwrap(), 0.0);
        }
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0]);
        assert!((estimation_error(&e1, &e2).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let d = DVector::from_vec(vec![1.0, 1.0]);
        assert!((estimation_error(&e1, &d).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(estimation_error(&DVector::zeros(2), &d), Err(Error::ZeroVector));
    }

    #[test]
    fn seeds_differ_across_cells_and_reps() {
        let a = derive_seed(1, 0, 0);
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(2, 0, 0));
        assert_eq!(a, derive_seed(1, 0, 0));
    }

    #[test]
    fn sweep_cardinality_and_pairing() {
        let cfg = SweepConfig {
            cells: vec![uniform(30, 8, 1.0, 0.8)],
            estimators: vec![EstimatorName::SdpCorrected, EstimatorName::SdpUncorrected],
            replications: 3,
            base_seed: 5,
            settings: EstimateSettings::default(),
        };
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        for pair in rows.chunks(2) {
            assert_eq!(pair[0].data_digest, pair[1].data_digest);
            assert_eq!(pair[0].replication_index, pair[1].replication_index);
            assert_eq!(pair[0].estimator_name, EstimatorName::SdpCorrected);
        }
        let again = run_sweep(&cfg).unwrap();
        let errors: Vec<u64> = rows.iter().map(|r| r.error.to_bits()).collect();
        let errors2: Vec<u64> = again.iter().map(|r| r.error.to_bits()).collect();
        assert_eq!(errors, errors2);
    }

    #[test]
    fn grid_is_omega_major() {
        let cells = SweepConfig::grid(&uniform(10, 4, 0.0, 1.0), &[0.2, 2.0], &[0.6, 1.0]);
        let labels: Vec<(f64, String)> = cells
            .iter()
            .map(|c| (c.model.omega, c.delta_label()))
            .collect();
        assert_eq!(
            labels,
            vec![
                (0.2, "0.60".to_string()),
                (0.2, "1.00".to_string()),
                (2.0, "0.60".to_string()),
                (2.0, "1.00".to_string())
            ]
        );
    }

    #[test]
    fn nonuniform_masks_follow_coordinates() {
        let cfg = ScenarioConfig {
            n: 4000,
            model: SpikedModel::new(4, 1.0),
            scenario: Scenario::NonuniformMissing {
                delta_vec: vec![1.0, 0.5, 0.25, 1.0],
            },
        };
        let (data, _) = generate(&cfg, 2).unwrap();
        for (j, want) in [1.0, 0.5, 0.25, 1.0].iter().enumerate() {
            let frac = data.values().column(j).iter().filter(|v| **v != 0.0).count() as f64 / 4000.0;
            assert!((frac - want).abs() < 0.03, "column {j}: {frac}");
        }
    }

    #[test]
    fn lowrank_target_is_rank_one() {
        let cfg = ScenarioConfig {
            n: 50,
            model: SpikedModel::new(5, 1.0),
            scenario: Scenario::LowrankAdditiveMissing {
                delta: 0.8,
                noise_sd: 1.0,
                scale: GramScale::RawGram,
                design_seed: 0,
            },
        };
        let target = cfg.target();
        // XᵀX = n·d₁²·vvᵀ with d₁² = ω‖β⁰‖² = 4.
        let v = cfg.truth();
        let expected = &v * v.transpose() * (50.0 * 4.0);
        assert!(crate::linalg::max_abs_diff(&target, &expected) < 1e-9);
        match cfg.correction() {
            CorrectionSpec::Lowrank { sigma_w, .. } => assert_eq!(sigma_w[(0, 0)], 50.0),
            _ => unreachable!(),
        }
    }
}
