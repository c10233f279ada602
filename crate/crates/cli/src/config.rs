//! Run configuration: a sectioned TOML file, one per reproduction pipeline.
//! Unknown keys are rejected with their location.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use icebox_core::estimate::{
    default_bounds, FitSpec, OptimMethod, OptimizerOptions, WARM_INITIAL_STEP,
};
use icebox_core::model::{param_index, ThermalParams, PARAM_COUNT, PARAM_NAMES};
use icebox_core::profile::ProfileMode;
use icebox_core::simulate::{InputProfile, SimConfig};

use crate::error::{CliError, ExitCategory};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every randomized stage; rerunning one config reproduces the
    /// artifacts bit-identically.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<OutputSection>,
    pub simulate: Option<SimulateSection>,
    pub fit: Option<FitSection>,
    pub predict: Option<PredictSection>,
    pub profile: Option<ProfileSection>,
    pub diagnose: Option<DiagnoseSection>,
    pub retune: Option<RetuneSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub duration_min: f64,
    pub setpoint: Option<f64>,
    pub deadband: Option<f64>,
    pub sample_dt: Option<f64>,
    pub substeps: Option<usize>,
    /// Truth parameters; the documented defaults when omitted.
    pub truth: Option<ParamsTable>,
    pub input_profile: Option<InputProfileSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputProfileSection {
    pub t_a_mean: Option<f64>,
    pub t_a_amplitude: Option<f64>,
    pub t_a_period_min: Option<f64>,
    pub e_in_cold: Option<f64>,
    pub e_in_warm: Option<f64>,
    pub e_in_lag_on: Option<f64>,
    pub e_in_lag_off: Option<f64>,
    pub e_out_cold: Option<f64>,
    pub e_out_warm: Option<f64>,
    pub e_out_lag_on: Option<f64>,
    pub e_out_lag_off: Option<f64>,
}

/// Full parameter table in config files; all fourteen entries required so a
/// config is self-documenting.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsTable {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "C_c")]
    pub c_c: f64,
    #[serde(rename = "C_w")]
    pub c_w: f64,
    #[serde(rename = "C_e")]
    pub c_e: f64,
    #[serde(rename = "R_wa")]
    pub r_wa: f64,
    #[serde(rename = "R_ce")]
    pub r_ce: f64,
    #[serde(rename = "R_cw")]
    pub r_cw: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_c: f64,
    pub sigma_w: f64,
    pub sigma_e: f64,
    pub nu: f64,
}

impl From<ParamsTable> for ThermalParams {
    fn from(t: ParamsTable) -> Self {
        ThermalParams {
            a: t.a,
            b: t.b,
            c_c: t.c_c,
            c_w: t.c_w,
            c_e: t.c_e,
            r_wa: t.r_wa,
            r_ce: t.r_ce,
            r_cw: t.r_cw,
            alpha: t.alpha,
            beta: t.beta,
            sigma_c: t.sigma_c,
            sigma_w: t.sigma_w,
            sigma_e: t.sigma_e,
            nu: t.nu,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub method: Option<String>,
    pub max_iters: Option<usize>,
    pub tolerance: Option<f64>,
    pub restarts: Option<usize>,
    pub jitter: Option<f64>,
    pub initial_step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsEntry {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Inline initial parameters, or a path to a params / fit-report file.
    pub init: Option<ParamsTable>,
    pub init_from: Option<PathBuf>,
    /// Names of free parameters; all free when omitted.
    pub free: Option<Vec<String>>,
    pub bounds: Option<BTreeMap<String, BoundsEntry>>,
    pub optimizer: Option<OptimizerSection>,
    pub hessian_step: Option<f64>,
    pub substeps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct X0Section {
    pub t_c: f64,
    pub t_w: f64,
    pub t_e: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSection {
    /// Params or fit-report file carrying the model parameters.
    pub params_from: PathBuf,
    pub x0: Option<X0Section>,
    pub substeps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinnedEntry {
    pub param: String,
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub param: String,
    /// Baseline fit report path.
    pub baseline: PathBuf,
    /// Explicit grid, or a log-spaced default around the estimate.
    pub grid: Option<Vec<f64>>,
    pub points: Option<usize>,
    pub factor: Option<f64>,
    pub pinned: Option<Vec<PinnedEntry>>,
    pub mode: Option<String>,
    pub optimizer: Option<OptimizerSection>,
    pub substeps: Option<usize>,
    /// Bounds overrides for the nuisance refits.
    pub bounds: Option<BTreeMap<String, BoundsEntry>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSection {
    pub params_from: PathBuf,
    pub max_lag: Option<usize>,
    pub substeps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetuneSection {
    pub baseline: PathBuf,
    /// Parameters to retune; `{a, b, C_c, R_cw}` when omitted.
    pub free: Option<Vec<String>>,
    pub bounds: Option<BTreeMap<String, BoundsEntry>>,
    pub optimizer: Option<OptimizerSection>,
    pub hessian_step: Option<f64>,
    pub substeps: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::new(
                ExitCategory::Data,
                format!("cannot read config {}: {e}", path.display()),
            )
        })?;
        toml::from_str(&text).map_err(|e| {
            CliError::new(
                ExitCategory::Config,
                format!("config {}: {e}", path.display()),
            )
        })
    }
}

pub fn config_error(msg: impl Into<String>) -> CliError {
    CliError::new(ExitCategory::Config, msg.into())
}

/// Resolves a list of parameter names into a free mask.
pub fn mask_from_names(names: &[String]) -> Result<[bool; PARAM_COUNT], CliError> {
    let mut mask = [false; PARAM_COUNT];
    for name in names {
        let idx = param_index(name).ok_or_else(|| {
            config_error(format!(
                "unknown parameter '{name}'; expected one of {}",
                PARAM_NAMES.join(", ")
            ))
        })?;
        mask[idx] = true;
    }
    Ok(mask)
}

pub fn bounds_from_config(
    overrides: Option<&BTreeMap<String, BoundsEntry>>,
) -> Result<[(f64, f64); PARAM_COUNT], CliError> {
    let mut bounds = default_bounds();
    if let Some(map) = overrides {
        for (name, entry) in map {
            let idx = param_index(name).ok_or_else(|| {
                config_error(format!("unknown parameter '{name}' in bounds"))
            })?;
            bounds[idx] = (entry.lo, entry.hi);
        }
    }
    Ok(bounds)
}

pub fn optimizer_from_config(
    section: Option<&OptimizerSection>,
    seed: u64,
    warm: bool,
) -> Result<OptimizerOptions, CliError> {
    let mut opts = OptimizerOptions {
        seed,
        ..OptimizerOptions::default()
    };
    if warm {
        opts.initial_step = WARM_INITIAL_STEP;
    }
    if let Some(s) = section {
        if let Some(method) = &s.method {
            opts.method = match method.as_str() {
                "nelder_mead" => OptimMethod::NelderMead,
                "quasi_newton" => OptimMethod::QuasiNewton,
                other => {
                    return Err(config_error(format!(
                        "unknown optimizer method '{other}' (expected nelder_mead or quasi_newton)"
                    )))
                }
            };
        }
        if let Some(v) = s.max_iters {
            opts.max_iters = v;
        }
        if let Some(v) = s.tolerance {
            opts.tolerance = v;
        }
        if let Some(v) = s.restarts {
            opts.restarts = v;
        }
        if let Some(v) = s.jitter {
            opts.jitter = v;
        }
        if let Some(v) = s.initial_step {
            opts.initial_step = v;
        }
    }
    Ok(opts)
}

pub fn sim_config_from(section: &SimulateSection, seed: u64) -> SimConfig {
    let mut profile = InputProfile::default();
    if let Some(p) = &section.input_profile {
        if let Some(v) = p.t_a_mean {
            profile.t_a_mean = v;
        }
        if let Some(v) = p.t_a_amplitude {
            profile.t_a_amplitude = v;
        }
        if let Some(v) = p.t_a_period_min {
            profile.t_a_period_min = v;
        }
        if let Some(v) = p.e_in_cold {
            profile.e_in_cold = v;
        }
        if let Some(v) = p.e_in_warm {
            profile.e_in_warm = v;
        }
        if let Some(v) = p.e_in_lag_on {
            profile.e_in_lag_on = v;
        }
        if let Some(v) = p.e_in_lag_off {
            profile.e_in_lag_off = v;
        }
        if let Some(v) = p.e_out_cold {
            profile.e_out_cold = v;
        }
        if let Some(v) = p.e_out_warm {
            profile.e_out_warm = v;
        }
        if let Some(v) = p.e_out_lag_on {
            profile.e_out_lag_on = v;
        }
        if let Some(v) = p.e_out_lag_off {
            profile.e_out_lag_off = v;
        }
    }
    let defaults = SimConfig::default();
    SimConfig {
        setpoint: section.setpoint.unwrap_or(defaults.setpoint),
        deadband: section.deadband.unwrap_or(defaults.deadband),
        duration_min: section.duration_min,
        sample_dt: section.sample_dt.unwrap_or(defaults.sample_dt),
        substeps: section.substeps.unwrap_or(defaults.substeps),
        seed,
        input_profile: profile,
    }
}

/// Builds a FitSpec from the fit section.
pub fn fit_spec_from(
    section: &FitSection,
    init: ThermalParams,
    seed: u64,
    threads: usize,
) -> Result<FitSpec, CliError> {
    let free_mask = match &section.free {
        Some(names) => mask_from_names(names)?,
        None => [true; PARAM_COUNT],
    };
    let spec = FitSpec {
        free_mask,
        bounds: bounds_from_config(section.bounds.as_ref())?,
        optimizer: optimizer_from_config(section.optimizer.as_ref(), seed, false)?,
        hessian_step: section.hessian_step.unwrap_or(1e-4),
        substeps: section.substeps.unwrap_or(icebox_core::ekf::DEFAULT_SUBSTEPS),
        threads,
        ..FitSpec::new(init)
    };
    Ok(spec)
}

pub fn profile_mode_from(name: Option<&str>) -> Result<ProfileMode, CliError> {
    match name {
        None | Some("warm_chain") => Ok(ProfileMode::WarmChain),
        Some("cold_parallel") => Ok(ProfileMode::ColdParallel),
        Some(other) => Err(config_error(format!(
            "unknown profile mode '{other}' (expected warm_chain or cold_parallel)"
        ))),
    }
}
