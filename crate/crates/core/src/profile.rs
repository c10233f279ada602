//! Profile likelihood over a parameter grid.
//!
//! For each grid value the profiled parameter (plus any pinned parameters)
//! is fixed and every remaining free parameter is re-optimized. A grid point
//! is inside the 95% confidence region when its minimized negative
//! log-likelihood stays within half the chi-square quantile of the overall
//! minimum. Flat profiles over wide grids indicate practical
//! non-identifiability; pinning a dependent partner restores curvature.

use serde::{Deserialize, Serialize};

use crate::estimate::{fit, FitReport, FitSpec, OptimizerOptions};
use crate::model::{Dataset, ThermalParams, PARAM_NAMES};
use crate::par::run_indexed;
use crate::{Error, Result};

/// chi-square 0.95 quantiles for 1 and 2 profiled parameters, from standard
/// tables; verified against an independent quantile computation in tests.
pub const CHI2_95_1: f64 = 3.841458820694124;
pub const CHI2_95_2: f64 = 5.991464547107979;

/// Confidence threshold above the minimum NLL: half the chi-square quantile.
pub fn ci_threshold(profiled: usize) -> f64 {
    match profiled {
        1 => 0.5 * CHI2_95_1,
        2 => 0.5 * CHI2_95_2,
        p => panic!("chi-square quantile hard-coded only for 1 or 2 profiled parameters, got {p}"),
    }
}

/// Grid evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMode {
    /// Sequential sweep, each point warm-started from its neighbor's
    /// solution. Follows ridges well.
    WarmChain,
    /// Every point cold-started from the base fit; embarrassingly parallel.
    ColdParallel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub mode: ProfileMode,
    pub optimizer: OptimizerOptions,
    pub substeps: usize,
    pub threads: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            mode: ProfileMode::WarmChain,
            optimizer: OptimizerOptions {
                restarts: 1,
                ..OptimizerOptions::default()
            },
            substeps: crate::ekf::DEFAULT_SUBSTEPS,
            threads: 1,
        }
    }
}

/// Result of profiling one parameter over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileResult {
    pub param_name: String,
    /// Ascending raw grid values.
    pub grid: Vec<f64>,
    /// Minimized NLL per grid point; infinite where the refit failed.
    pub profile_nll: Vec<f64>,
    /// Overall minimum NLL (base fit or best grid point).
    pub mle_nll: f64,
    /// Whether each grid point lies inside the 95% confidence region.
    pub in_ci: Vec<bool>,
    /// Extent of the in-region grid values.
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// The region touches the grid edge: the true interval may extend
    /// beyond the grid.
    pub open_lo: bool,
    pub open_hi: bool,
    /// Parameters held fixed during profiling, besides the profiled one.
    pub pinned: Vec<(String, f64)>,
    /// Re-optimized full parameter vectors, one per grid point.
    pub solutions: Vec<Option<ThermalParams>>,
    /// Grid points whose refit failed.
    pub failed: Vec<bool>,
}

/// Default profiling grid: `points` log-spaced values covering
/// `center / factor` to `center * factor`.
pub fn default_grid(center: f64, factor: f64, points: usize) -> Vec<f64> {
    assert!(center > 0.0 && factor > 1.0 && points >= 2);
    let lo = (center / factor).ln();
    let hi = (center * factor).ln();
    (0..points)
        .map(|k| (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

fn refit_at(
    base_spec: &FitSpec,
    data: &Dataset,
    init: ThermalParams,
    fixed: &[(usize, f64)],
    opts: &ProfileOptions,
) -> Option<FitReport> {
    let mut init = init;
    let mut mask = base_spec.free_mask;
    for &(idx, value) in fixed {
        init.set(idx, value);
        mask[idx] = false;
    }
    if !mask.iter().any(|&f| f) {
        return None;
    }
    let spec = FitSpec {
        init,
        free_mask: mask,
        optimizer: opts.optimizer,
        substeps: opts.substeps,
        threads: 1,
        ..*base_spec
    };
    fit(&spec, data).ok()
}

/// Profiles `param_name` over `grid`, re-optimizing all other free
/// parameters at each point, optionally with additional `pinned` parameters
/// held fixed. Per-point optimization failures are flagged, not fatal.
pub fn profile_likelihood(
    data: &Dataset,
    param_name: &str,
    grid: &[f64],
    pinned: &[(usize, f64)],
    base_fit: &FitReport,
    base_spec: &FitSpec,
    opts: &ProfileOptions,
) -> Result<ProfileResult> {
    let param = crate::model::param_index(param_name).ok_or_else(|| {
        Error::InvalidConfig(format!("unknown parameter name '{param_name}'"))
    })?;
    if !base_fit.free_mask[param] {
        return Err(Error::InvalidConfig(format!(
            "parameter '{param_name}' is not free in the base fit"
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("profile grid must be nonempty".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "profile grid must be strictly increasing".into(),
        ));
    }
    for &(idx, _) in pinned {
        if idx == param {
            return Err(Error::InvalidConfig(
                "cannot pin the profiled parameter".into(),
            ));
        }
    }

    let n = grid.len();
    let reports: Vec<Option<FitReport>> = match opts.mode {
        ProfileMode::WarmChain => {
            // Start the sweep at the grid point nearest the MLE and walk
            // outward in both directions, warm-starting from the neighbor.
            let mle_value = base_fit.estimates.get(param);
            let start = (0..n)
                .min_by(|&a, &b| {
                    (grid[a] - mle_value)
                        .abs()
                        .total_cmp(&(grid[b] - mle_value).abs())
                })
                .unwrap();
            let mut out: Vec<Option<FitReport>> = vec![None; n];
            for direction in [1i64, -1] {
                let mut warm = base_fit.estimates;
                let mut k = start as i64;
                if direction < 0 {
                    k -= 1;
                }
                while k >= 0 && (k as usize) < n {
                    let idx = k as usize;
                    let mut fixed = vec![(param, grid[idx])];
                    fixed.extend_from_slice(pinned);
                    let report = refit_at(base_spec, data, warm, &fixed, opts);
                    if let Some(r) = &report {
                        warm = r.estimates;
                    }
                    out[idx] = report;
                    k += direction;
                }
            }
            out
        }
        ProfileMode::ColdParallel => run_indexed(n, opts.threads, |idx| {
            let mut fixed = vec![(param, grid[idx])];
            fixed.extend_from_slice(pinned);
            refit_at(base_spec, data, base_fit.estimates, &fixed, opts)
        }),
    };

    let profile_nll: Vec<f64> = reports
        .iter()
        .map(|r| r.as_ref().map_or(f64::INFINITY, |r| r.neg_log_lik))
        .collect();
    let failed: Vec<bool> = reports.iter().map(|r| r.is_none()).collect();
    let solutions: Vec<Option<ThermalParams>> =
        reports.iter().map(|r| r.as_ref().map(|r| r.estimates)).collect();

    let grid_min = profile_nll.iter().cloned().fold(f64::INFINITY, f64::min);
    let mle_nll = base_fit.neg_log_lik.min(grid_min);
    let threshold = mle_nll + ci_threshold(1);
    let in_ci: Vec<bool> = profile_nll.iter().map(|&v| v <= threshold).collect();

    let mut ci_lo = f64::NAN;
    let mut ci_hi = f64::NAN;
    for (k, &inside) in in_ci.iter().enumerate() {
        if inside {
            if ci_lo.is_nan() {
                ci_lo = grid[k];
            }
            ci_hi = grid[k];
        }
    }
    let open_lo = *in_ci.first().unwrap();
    let open_hi = *in_ci.last().unwrap();

    Ok(ProfileResult {
        param_name: PARAM_NAMES[param].to_string(),
        grid: grid.to_vec(),
        profile_nll,
        mle_nll,
        in_ci,
        ci_lo,
        ci_hi,
        open_lo,
        open_hi,
        pinned: pinned
            .iter()
            .map(|&(idx, v)| (PARAM_NAMES[idx].to_string(), v))
            .collect(),
        solutions,
        failed,
    })
}

/// Trace of a partner parameter's re-optimized value along the profile grid,
/// exposing functional dependence between the two parameters.
pub fn profile_pair_trace(
    data: &Dataset,
    param_name: &str,
    grid: &[f64],
    partner_name: &str,
    base_fit: &FitReport,
    base_spec: &FitSpec,
    opts: &ProfileOptions,
) -> Result<Vec<(f64, f64)>> {
    let partner = crate::model::param_index(partner_name).ok_or_else(|| {
        Error::InvalidConfig(format!("unknown parameter name '{partner_name}'"))
    })?;
    if !base_fit.free_mask[partner] {
        return Err(Error::InvalidConfig(format!(
            "partner '{partner_name}' is not free in the base fit"
        )));
    }
    let result = profile_likelihood(data, param_name, grid, &[], base_fit, base_spec, opts)?;
    Ok(result
        .grid
        .iter()
        .zip(&result.solutions)
        .filter_map(|(&g, sol)| sol.map(|p| (g, p.get(partner))))
        .collect())
}
