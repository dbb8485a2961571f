//! TOML run configuration.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use super::CliError;
use crate::bias_correction::{CorrectionSpec, GramScale};
use crate::fantope::FantopeSettings;
use crate::pipeline::EstimateSettings;
use crate::refine::{RefineConfig, StepRule};
use crate::simulation::{
    analytic_m, EstimatorName, Scenario, ScenarioConfig, SpikedModel, SweepConfig, UDistribution,
};

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<T, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

fn config_err(e: crate::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// `[fantope]` section.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FantopeSection {
    pub mu: Option<f64>,
    pub mu_scale: Option<f64>,
    pub rho: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
}

/// `[refine]` section. Infinite bounds are written as `inf`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineSection {
    pub lambda: Option<f64>,
    pub lambda_scale: Option<f64>,
    pub q_bound: Option<f64>,
    pub ball_radius: Option<f64>,
    pub max_iter: Option<usize>,
    pub beta_shrink: Option<f64>,
    pub initial_step: Option<f64>,
    pub stat_tol: Option<f64>,
}

pub fn settings_from(
    fantope: &FantopeSection,
    refine: &RefineSection,
    skip_refine: bool,
) -> Result<EstimateSettings, CliError> {
    let d = EstimateSettings::default();
    let fd = FantopeSettings::default();
    let rd = RefineConfig::default();
    let StepRule::Backtracking {
        beta_shrink: default_shrink,
        ..
    } = rd.step_rule;
    let settings = EstimateSettings {
        mu: fantope.mu,
        mu_scale: fantope.mu_scale.unwrap_or(d.mu_scale),
        lambda: refine.lambda,
        lambda_scale: refine.lambda_scale.unwrap_or(d.lambda_scale),
        fantope: FantopeSettings {
            rho: fantope.rho.unwrap_or(fd.rho),
            max_iter: fantope.max_iter.unwrap_or(fd.max_iter),
            tol_abs: fantope.tol_abs.unwrap_or(fd.tol_abs),
            tol_rel: fantope.tol_rel.unwrap_or(fd.tol_rel),
        },
        refine: RefineConfig {
            lambda: 0.0,
            q_bound: refine.q_bound.unwrap_or(rd.q_bound),
            ball_radius: refine.ball_radius.unwrap_or(rd.ball_radius),
            max_iter: refine.max_iter.unwrap_or(rd.max_iter),
            step_rule: StepRule::Backtracking {
                beta_shrink: refine.beta_shrink.unwrap_or(default_shrink),
                initial_step: refine.initial_step,
            },
            stat_tol: refine.stat_tol.unwrap_or(rd.stat_tol),
        },
        skip_refine,
    };
    settings.fantope.validate().map_err(config_err)?;
    settings.refine.validate().map_err(config_err)?;
    for (name, v) in [
        ("mu", settings.mu),
        ("lambda", settings.lambda),
        ("mu_scale", Some(settings.mu_scale)),
        ("lambda_scale", Some(settings.lambda_scale)),
    ] {
        if let Some(v) = v {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Config(format!("`{name}` must be nonnegative, got {v}")));
            }
        }
    }
    Ok(settings)
}

/// Simulation config: the data model plus a `[scenario]` table.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub n: usize,
    pub p: usize,
    pub omega: f64,
    pub beta0: Option<Vec<f64>>,
    pub scenario: Scenario,
}

impl SimulateFile {
    pub fn scenario_config(&self) -> Result<ScenarioConfig, CliError> {
        let model = match &self.beta0 {
            Some(b) => {
                if b.len() != self.p {
                    return Err(CliError::Config(format!(
                        "`beta0` has {} entries but p = {}",
                        b.len(),
                        self.p
                    )));
                }
                SpikedModel::with_beta0(self.omega, b.clone())
            }
            None => SpikedModel::new(self.p, self.omega),
        };
        let cfg = ScenarioConfig {
            n: self.n,
            model,
            scenario: self.scenario.clone(),
        };
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

/// `[correction]` table of an estimate config.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorrectionSection {
    None,
    UniformMissing {
        delta: f64,
    },
    /// Either an explicit `m` or the distribution of the noise entries.
    Multiplicative {
        m: Option<Vec<Vec<f64>>>,
        noise: Option<UDistribution>,
    },
    Nonuniform {
        delta_vec: Vec<f64>,
    },
    /// Either an explicit `sigma_w` or an isotropic `noise_var`.
    Lowrank {
        delta: f64,
        sigma_w: Option<Vec<Vec<f64>>>,
        noise_var: Option<f64>,
        #[serde(default)]
        scale: GramScale,
    },
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>], p: usize) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(CliError::Config(format!("`{name}` must be a {p}x{p} array of arrays")));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

impl CorrectionSection {
    /// Builds the correction for `p` variables observed over `n` rows.
    pub fn to_spec(&self, p: usize, n: usize) -> Result<CorrectionSpec, CliError> {
        let spec = match self {
            CorrectionSection::None => CorrectionSpec::None,
            CorrectionSection::UniformMissing { delta } => {
                CorrectionSpec::UniformMissing { delta: *delta }
            }
            CorrectionSection::Multiplicative { m, noise } => match (m, noise) {
                (Some(rows), None) => CorrectionSpec::Multiplicative {
                    m: matrix_from_rows("m", rows, p)?,
                },
                (None, Some(noise)) => CorrectionSpec::Multiplicative {
                    m: analytic_m(noise, p).map_err(config_err)?,
                },
                _ => {
                    return Err(CliError::Config(
                        "multiplicative correction needs exactly one of `m` or `noise`".into(),
                    ))
                }
            },
            CorrectionSection::Nonuniform { delta_vec } => {
                if delta_vec.len() != p {
                    return Err(CliError::Config(format!(
                        "`delta_vec` has {} entries but the data has {p} columns",
                        delta_vec.len()
                    )));
                }
                CorrectionSpec::Nonuniform {
                    delta_vec: delta_vec.clone(),
                }
            }
            CorrectionSection::Lowrank {
                delta,
                sigma_w,
                noise_var,
                scale,
            } => {
                let sigma_w = match (sigma_w, noise_var) {
                    (Some(rows), None) => matrix_from_rows("sigma_w", rows, p)?,
                    (None, Some(v)) => {
                        let factor = match scale {
                            GramScale::RawGram => n as f64,
                            GramScale::MeanNormalized => 1.0,
                        };
                        DMatrix::identity(p, p) * (v * factor)
                    }
                    _ => {
                        return Err(CliError::Config(
                            "lowrank correction needs exactly one of `sigma_w` or `noise_var`"
                                .into(),
                        ))
                    }
                };
                CorrectionSpec::Lowrank {
                    delta: *delta,
                    sigma_w,
                    scale: *scale,
                }
            }
        };
        spec.validate(Some(p)).map_err(config_err)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateFile {
    pub correction: Option<CorrectionSection>,
    #[serde(default)]
    pub fantope: FantopeSection,
    #[serde(default)]
    pub refine: RefineSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub n: usize,
    pub p: usize,
    pub beta0: Option<Vec<f64>>,
    pub omega: Vec<f64>,
    /// Observation probabilities; omitted for non-uniform masks.
    pub delta: Option<Vec<f64>>,
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub estimators: Vec<EstimatorName>,
    pub scenario: Scenario,
    #[serde(default)]
    pub fantope: FantopeSection,
    #[serde(default)]
    pub refine: RefineSection,
}

impl SweepFile {
    pub fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        if self.omega.is_empty() {
            return Err(CliError::Config("`omega` must list at least one value".into()));
        }
        let template = SimulateFile {
            n: self.n,
            p: self.p,
            omega: self.omega[0],
            beta0: self.beta0.clone(),
            scenario: self.scenario.clone(),
        }
        .scenario_config()?;
        let cells = match (&self.scenario, &self.delta) {
            (Scenario::NonuniformMissing { .. }, Some(_)) => {
                return Err(CliError::Config(
                    "`delta` grid does not apply to nonuniform_missing; set `delta_vec` in [scenario]"
                        .into(),
                ))
            }
            (Scenario::NonuniformMissing { .. }, None) => {
                self.omega.iter().map(|&w| template.with_omega(w)).collect()
            }
            (_, Some(deltas)) if !deltas.is_empty() => SweepConfig::grid(&template, &self.omega, deltas),
            (_, _) => self.omega.iter().map(|&w| template.with_omega(w)).collect(),
        };
        let config = SweepConfig {
            cells,
            estimators: self.estimators.clone(),
            replications: self.replications,
            base_seed: self.base_seed,
            settings: settings_from(&self.fantope, &self.refine, false)?,
        };
        config.validate().map_err(config_err)?;
        Ok(config)
    }
}
