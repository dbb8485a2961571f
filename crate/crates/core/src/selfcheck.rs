//! Oracle checks run by the `selfcheck` command.
//!
//! Each oracle recomputes a quantity by an independent route (brute-force
//! grid search, finite differences, Monte-Carlo averaging, a separate
//! bisection) and compares it with the library's answer.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bias_correction::{correct, CorrectionSpec, GramScale, ObservedData};
use crate::fantope::{fantope_objective, project_fantope, solve_fantope, FantopeProblem, FantopeSettings};
use crate::refine::risk_gradient;
use crate::simulation::{derive_seed, generate, Scenario, ScenarioConfig, SpikedModel, UDistribution};
use crate::CorrectedCovariance;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst measured discrepancy, in the units of `threshold`.
    pub discrepancy: f64,
    pub threshold: f64,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<28} discrepancy={:.3e} threshold={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.discrepancy,
            self.threshold
        )
    }
}

fn check(name: &'static str, discrepancy: f64, threshold: f64) -> CheckResult {
    CheckResult {
        name,
        passed: discrepancy.is_finite() && discrepancy <= threshold,
        discrepancy,
        threshold,
    }
}

fn random_symmetric(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    (&a + a.transpose()) * 0.5
}

/// Reference Fantope projection: raw nalgebra eigendecomposition plus a
/// plain bisection for the shift.
pub fn reference_fantope_projection(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let lambdas: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let total = |t: f64| lambdas.iter().map(|l| (l - t).clamp(0.0, 1.0)).sum::<f64>();
    let mut lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let gamma = DVector::from_iterator(lambdas.len(), lambdas.iter().map(|l| (l - theta).clamp(0.0, 1.0)));
    &eig.eigenvectors * DMatrix::from_diagonal(&gamma) * eig.eigenvectors.transpose()
}

/// Worst Frobenius gap between [`project_fantope`] and the reference over
/// random symmetric `p × p` matrices.
pub fn fantope_projection_gap(trials: usize, p: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let a = random_symmetric(&mut rng, p, 1.0);
            match project_fantope(&a) {
                Ok(f) => (f - reference_fantope_projection(&a)).norm(),
                Err(_) => f64::INFINITY,
            }
        })
        .fold(0.0, f64::max)
}

/// Minimum of `−trace(ΣF) + μ‖F‖₁` over the 2×2 Fantope by grid search.
///
/// The 2×2 Fantope is the disk `F = [[½ + r cos φ, r sin φ], [r sin φ, ½ − r cos φ]]`,
/// `0 ≤ r ≤ ½`. A coarse polar grid is refined around the best point.
pub fn grid_minimum_2x2(sigma: &DMatrix<f64>, mu: f64) -> f64 {
    let objective = |r: f64, phi: f64| {
        let a = 0.5 + r * phi.cos();
        let b = r * phi.sin();
        let f = DMatrix::from_row_slice(2, 2, &[a, b, b, 1.0 - a]);
        fantope_objective(sigma, &f, mu)
    };
    let tau = std::f64::consts::TAU;
    let steps = 400;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=steps {
        let r = 0.5 * i as f64 / steps as f64;
        for k in 0..steps {
            let phi = tau * k as f64 / steps as f64;
            let v = objective(r, phi);
            if v < best.0 {
                best = (v, r, phi);
            }
        }
    }
    let mut r_half = 0.5 / steps as f64;
    let mut phi_half = tau / steps as f64;
    for _ in 0..6 {
        let (_, r0, phi0) = best;
        for i in 0..=40 {
            let r = (r0 - r_half + 2.0 * r_half * i as f64 / 40.0).clamp(0.0, 0.5);
            for k in 0..=40 {
                let phi = phi0 - phi_half + 2.0 * phi_half * k as f64 / 40.0;
                let v = objective(r, phi);
                if v < best.0 {
                    best = (v, r, phi);
                }
            }
        }
        r_half /= 10.0;
        phi_half /= 10.0;
    }
    best.0
}

/// Worst gap between the ADMM objective and the grid-search minimum over
/// random 2×2 problems at the given penalties.
pub fn sdp_2x2_gap(trials: usize, mus: &[f64], seed: u64, settings: FantopeSettings) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let sigma = random_symmetric(&mut rng, 2, 1.0);
        for &mu in mus {
            let problem = FantopeProblem::new(&sigma, mu).with_settings(settings);
            let gap = match solve_fantope(&problem) {
                Ok(sol) => (sol.objective - grid_minimum_2x2(&sigma, mu)).abs(),
                Err(_) => f64::INFINITY,
            };
            worst = worst.max(gap);
        }
    }
    worst
}

/// Worst relative error of [`risk_gradient`] against central differences
/// of `(1/4)‖Σ − ββᵀ‖_F²` (evaluated directly, not in expanded form).
pub fn gradient_fd_error(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let risk = |sigma: &DMatrix<f64>, b: &DVector<f64>| 0.25 * (sigma - b * b.transpose()).norm_squared();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let p = rng.random_range(3..=10);
        let sigma = random_symmetric(&mut rng, p, 1.0);
        let beta = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cov = CorrectedCovariance::from_matrix(&sigma, CorrectionSpec::None)
            .expect("finite square matrix");
        let analytic = risk_gradient(&cov, &beta).expect("matching dimensions");
        let numeric = DVector::from_fn(p, |i, _| {
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[i] += h;
            down[i] -= h;
            (risk(&sigma, &up) - risk(&sigma, &down)) / (2.0 * h)
        });
        let rel = (&analytic - &numeric).norm() / analytic.norm().max(1e-12);
        worst = worst.max(rel);
    }
    worst
}

/// Monte-Carlo bias check: the largest `|mean − target| / SE` over matrix
/// entries after `replications` draws of `config`, where each draw is
/// corrected by `corrector`.
pub fn unbiasedness_z(
    config: &ScenarioConfig,
    replications: usize,
    base_seed: u64,
    corrector: impl Fn(&ObservedData) -> DMatrix<f64>,
) -> f64 {
    let p = config.model.p;
    let mut sum = DMatrix::<f64>::zeros(p, p);
    let mut sum_sq = DMatrix::<f64>::zeros(p, p);
    for r in 0..replications {
        let (data, _) = match generate(config, derive_seed(base_seed, 0, r)) {
            Ok(d) => d,
            Err(_) => return f64::INFINITY,
        };
        let s = corrector(&data);
        sum += &s;
        sum_sq += s.component_mul(&s);
    }
    let k = replications as f64;
    let target = config.target();
    let mut worst: f64 = 0.0;
    for j in 0..p {
        for i in 0..p {
            let mean = sum[(i, j)] / k;
            let var = ((sum_sq[(i, j)] / k - mean * mean) * k / (k - 1.0)).max(0.0);
            let se = (var / k).sqrt();
            let diff = (mean - target[(i, j)]).abs();
            let z = if se > 0.0 {
                diff / se
            } else if diff <= 1e-12 * (1.0 + target[(i, j)].abs()) {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
    }
    worst
}

/// The four scenarios used for the unbiasedness oracle (`p = 5`).
pub fn unbiasedness_scenarios(n: usize) -> Vec<(&'static str, ScenarioConfig)> {
    let model = SpikedModel::new(5, 1.0);
    let cfg = |scenario| ScenarioConfig {
        n,
        model: model.clone(),
        scenario,
    };
    vec![
        ("uniform_missing", cfg(Scenario::UniformMissing { delta: 0.7 })),
        (
            "multiplicative",
            cfg(Scenario::Multiplicative {
                noise: UDistribution::Uniform { a: 0.5, b: 1.5 },
            }),
        ),
        (
            "nonuniform_missing",
            cfg(Scenario::NonuniformMissing {
                delta_vec: vec![0.6, 0.9, 0.7, 1.0, 0.8],
            }),
        ),
        (
            "lowrank_additive_missing",
            cfg(Scenario::LowrankAdditiveMissing {
                delta: 0.8,
                noise_sd: 1.0,
                scale: GramScale::RawGram,
                design_seed: 7,
            }),
        ),
    ]
}

/// Corrects with the scenario's own matching correction.
pub fn matching_corrector(config: &ScenarioConfig) -> impl Fn(&ObservedData) -> DMatrix<f64> {
    let spec = config.correction();
    move |data| {
        correct(data, &spec)
            .map(|s| s.matrix)
            .unwrap_or_else(|_| DMatrix::from_element(data.n_cols(), data.n_cols(), f64::NAN))
    }
}

/// Runs every oracle at its documented size.
pub fn run_all() -> Vec<CheckResult> {
    let mut out = vec![
        check("fantope_projection_3x3", fantope_projection_gap(100, 3, 1), 1e-8),
        check(
            "sdp_2x2_grid_search",
            sdp_2x2_gap(20, &[0.05, 0.2], 2, FantopeSettings::default()),
            1e-5,
        ),
        check("gradient_finite_diff", gradient_fd_error(100, 3), 1e-6),
    ];
    let names = [
        "unbiased_uniform_missing",
        "unbiased_multiplicative",
        "unbiased_nonuniform_missing",
        "unbiased_lowrank_additive",
    ];
    for ((_, cfg), name) in unbiasedness_scenarios(5000).into_iter().zip(names) {
        let z = unbiasedness_z(&cfg, 200, 4, matching_corrector(&cfg));
        out.push(check(name, z, 3.0));
    }
    out
}
