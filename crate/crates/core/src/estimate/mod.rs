//! Maximum likelihood estimation.
//!
//! The negative log-likelihood from the filter is minimized over a chosen
//! subset of the parameter vector in transformed space (log scale for
//! positivity-constrained parameters), with multi-start to cope with the
//! flat, ridged likelihood surface typical of this model class. Uncertainty
//! comes from a central finite-difference Hessian of the negative
//! log-likelihood: its inverse is the parameter covariance, which decomposes
//! into standard errors and a correlation matrix.

mod optim;
pub mod transform;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ekf::{filter_pass, FilterState, DEFAULT_SUBSTEPS};
use crate::model::{Dataset, ThermalParams, PARAM_COUNT, PARAM_NAMES};
use crate::par::run_indexed;
use crate::{Error, Result};

pub use optim::PENALTY;
use optim::{nelder_mead, quasi_newton, OptimOptions, OptimResult};
use transform::{to_internal, to_raw, transform_for, Transform};

/// Free set used by the partial-retune workflow: `{a, b, C_c, R_cw}`.
pub const RETUNE_MASK: [bool; PARAM_COUNT] = {
    let mut mask = [false; PARAM_COUNT];
    mask[0] = true; // a
    mask[1] = true; // b
    mask[2] = true; // C_c
    mask[7] = true; // R_cw
    mask
};

/// Optimizer selection and iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub method: OptimMethod,
    pub max_iters: usize,
    /// Convergence tolerance on the objective spread.
    pub tolerance: f64,
    /// Number of starts: the first is the supplied initial point, the rest
    /// are jittered copies. The best final value wins.
    pub restarts: usize,
    /// Standard deviation of the transformed-space restart jitter.
    pub jitter: f64,
    /// Seed for the restart jitter.
    pub seed: u64,
    /// Initial simplex displacement (or line-search scale), transformed
    /// space. Warm-started refits want this small.
    pub initial_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimMethod {
    NelderMead,
    QuasiNewton,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            method: OptimMethod::NelderMead,
            max_iters: 4000,
            tolerance: 1e-8,
            restarts: 5,
            jitter: 0.3,
            seed: 0,
            initial_step: 0.25,
        }
    }
}

/// Small initial simplex for warm-started refits (retune, profile chains):
/// keeps the optimizer from wandering along flat ridges when it already
/// starts at an optimum.
pub const WARM_INITIAL_STEP: f64 = 0.05;

/// Everything a fit needs besides the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub init: ThermalParams,
    /// Which parameters are optimized, in canonical order.
    pub free_mask: [bool; PARAM_COUNT],
    /// Raw-space box bounds, in canonical order.
    pub bounds: [(f64, f64); PARAM_COUNT],
    pub optimizer: OptimizerOptions,
    /// Relative finite-difference step for the Hessian, in transformed space.
    pub hessian_step: f64,
    /// Moment-propagation sub-intervals per sample.
    pub substeps: usize,
    /// Worker threads for restarts and Hessian evaluation.
    pub threads: usize,
}

/// Wide default bounds per parameter, raw space.
pub fn default_bounds() -> [(f64, f64); PARAM_COUNT] {
    let mut bounds = [(1e-8, 1e8); PARAM_COUNT];
    bounds[0] = (0.0, 1e3); // a
    bounds[1] = (0.0, 1e3); // b
    bounds[9] = (-1e6, 1e6); // beta
    bounds[10] = (1e-9, 1e3); // sigma_c
    bounds[11] = (1e-9, 1e3); // sigma_w
    bounds[12] = (1e-9, 1e3); // sigma_e
    bounds[13] = (1e-12, 1e3); // nu
    bounds
}

impl FitSpec {
    /// Spec with every parameter free and default knobs.
    pub fn new(init: ThermalParams) -> Self {
        Self {
            init,
            free_mask: [true; PARAM_COUNT],
            bounds: default_bounds(),
            optimizer: OptimizerOptions::default(),
            hessian_step: 1e-4,
            substeps: DEFAULT_SUBSTEPS,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.init.validate()?;
        if !self.free_mask.iter().any(|&f| f) {
            return Err(Error::InvalidConfig(
                "at least one parameter must be free".into(),
            ));
        }
        if self.substeps < 1 {
            return Err(Error::InvalidConfig("substeps must be >= 1".into()));
        }
        if !(self.hessian_step > 0.0) {
            return Err(Error::InvalidConfig("hessian_step must be > 0".into()));
        }
        let init = self.init.to_array();
        for i in 0..PARAM_COUNT {
            let (lo, hi) = self.bounds[i];
            if !(lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "bounds for {} are empty: [{lo}, {hi}]",
                    PARAM_NAMES[i]
                )));
            }
            if self.free_mask[i] {
                if init[i] < lo || init[i] > hi {
                    return Err(Error::InvalidConfig(format!(
                        "initial {} = {} outside bounds [{lo}, {hi}]",
                        PARAM_NAMES[i], init[i]
                    )));
                }
                if transform_for(i) == Transform::Log && (init[i] <= 0.0 || lo <= 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "free log-scale parameter {} requires positive value and lower bound",
                        PARAM_NAMES[i]
                    )));
                }
            }
        }
        Ok(())
    }

    fn free_indices(&self) -> Vec<usize> {
        (0..PARAM_COUNT).filter(|&i| self.free_mask[i]).collect()
    }
}

/// Relative change of one retuned parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeChange {
    pub name: String,
    pub old: f64,
    pub new: f64,
    /// `(new - old) / old`.
    pub relative: f64,
}

/// Estimation result with Hessian-based uncertainty.
///
/// `std_errors` are on the transformed (optimizer) scale; the Wald intervals
/// are computed there and mapped back to raw values, so they are asymmetric
/// for log-scale parameters. When the Hessian is not positive definite the
/// uncertainty fields are absent and a warning is recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub estimates: ThermalParams,
    pub free_mask: [bool; PARAM_COUNT],
    pub neg_log_lik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub hessian_pd: bool,
    /// Per free parameter, transformed scale.
    pub std_errors: Option<Vec<f64>>,
    /// Per free parameter, raw space.
    pub wald_ci95: Option<Vec<(f64, f64)>>,
    /// Raw-scale Wald statistics (delta method for log-scale parameters).
    pub z_scores: Option<Vec<f64>>,
    /// Correlation matrix over the free parameters, row-major.
    pub correlation: Option<Vec<Vec<f64>>>,
    pub warnings: Vec<String>,
    /// Present on retune reports.
    pub relative_changes: Option<Vec<RelativeChange>>,
}

impl FitReport {
    /// Names of the free parameters in canonical order.
    pub fn free_names(&self) -> Vec<&'static str> {
        (0..PARAM_COUNT)
            .filter(|&i| self.free_mask[i])
            .map(|i| PARAM_NAMES[i])
            .collect()
    }
}

/// Negative log-likelihood of the data under `p`, with the filter
/// initialized at the first observation.
///
/// Returns a large finite penalty instead of an error when the parameters
/// are invalid or the filter fails, so optimizers can keep moving.
pub fn neg_log_lik(p: &ThermalParams, data: &Dataset, substeps: usize) -> f64 {
    if p.validate().is_err() {
        return PENALTY;
    }
    let init = FilterState::diffuse_init(data, p);
    match filter_pass(p, data, init, substeps) {
        Ok(pass) if pass.neg_log_lik.is_finite() => pass.neg_log_lik,
        _ => PENALTY,
    }
}

/// Raw parameters assembled from the transformed free coordinates.
fn assemble(base: &ThermalParams, free: &[usize], z: &[f64]) -> ThermalParams {
    let mut arr = base.to_array();
    for (&i, &zi) in free.iter().zip(z) {
        arr[i] = to_raw(transform_for(i), zi);
    }
    ThermalParams::from_array(arr)
}

fn transformed_bounds(spec: &FitSpec, free: &[usize]) -> Vec<(f64, f64)> {
    free.iter()
        .map(|&i| {
            let (lo, hi) = spec.bounds[i];
            match transform_for(i) {
                Transform::Log => (lo.ln(), hi.ln()),
                Transform::Identity => (lo, hi),
            }
        })
        .collect()
}

fn run_optimizer<F>(f: &F, z0: &[f64], bounds: &[(f64, f64)], spec: &FitSpec) -> OptimResult
where
    F: Fn(&[f64]) -> f64,
{
    let opts = OptimOptions {
        max_iters: spec.optimizer.max_iters,
        tolerance: spec.optimizer.tolerance,
        initial_step: spec.optimizer.initial_step,
    };
    match spec.optimizer.method {
        OptimMethod::NelderMead => nelder_mead(f, z0, bounds, &opts),
        OptimMethod::QuasiNewton => quasi_newton(f, z0, bounds, &opts),
    }
}

/// Maximum likelihood fit of the free parameters.
///
/// Runs `restarts` independent starts (the first unjittered) and keeps the
/// best final value; ties break toward the lower restart index, so results
/// do not depend on thread scheduling.
pub fn fit(spec: &FitSpec, data: &Dataset) -> Result<FitReport> {
    spec.validate()?;
    if data.len() < 100 {
        return Err(Error::InvalidConfig(format!(
            "need at least 100 samples to fit, got {}",
            data.len()
        )));
    }
    let free = spec.free_indices();
    let bounds = transformed_bounds(spec, &free);
    let init = spec.init;
    let objective = |z: &[f64]| {
        let p = assemble(&init, &free, z);
        neg_log_lik(&p, data, spec.substeps)
    };

    let z0: Vec<f64> = free
        .iter()
        .map(|&i| to_internal(transform_for(i), init.get(i)))
        .collect();

    let starts: Vec<Vec<f64>> = (0..spec.optimizer.restarts.max(1))
        .map(|r| {
            if r == 0 {
                z0.clone()
            } else {
                let mut rng = ChaCha12Rng::seed_from_u64(
                    spec.optimizer
                        .seed
                        .wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                );
                z0.iter()
                    .zip(&bounds)
                    .map(|(&z, &(lo, hi))| {
                        let noise: f64 = rng.sample(StandardNormal);
                        (z + spec.optimizer.jitter * noise).clamp(lo, hi)
                    })
                    .collect()
            }
        })
        .collect();

    let results = run_indexed(starts.len(), spec.threads, |r| {
        run_optimizer(&objective, &starts[r], &bounds, spec)
    });

    let best_index = (0..results.len())
        .min_by(|&a, &b| results[a].f.total_cmp(&results[b].f))
        .expect("at least one restart");
    let best = &results[best_index];
    if best.f >= PENALTY * 0.5 {
        let diag: Vec<String> = results
            .iter()
            .enumerate()
            .map(|(r, res)| {
                format!(
                    "restart {r}: nll = {:.6e}, iters = {}, converged = {}",
                    res.f, res.iters, res.converged
                )
            })
            .collect();
        return Err(Error::EstimationFailed(format!(
            "all restarts ended in the penalty region: {}",
            diag.join("; ")
        )));
    }

    let estimates = assemble(&init, &free, &best.x);
    let total_evals: usize = results.iter().map(|r| r.evals).sum();
    let mut report = FitReport {
        estimates,
        free_mask: spec.free_mask,
        neg_log_lik: best.f,
        converged: best.converged,
        iterations: best.iters,
        evaluations: total_evals,
        hessian_pd: false,
        std_errors: None,
        wald_ci95: None,
        z_scores: None,
        correlation: None,
        warnings: Vec::new(),
        relative_changes: None,
    };

    let summary = hessian_covariance(&estimates, data, spec)?;
    attach_uncertainty(&mut report, &free, summary);
    Ok(report)
}

fn attach_uncertainty(report: &mut FitReport, free: &[usize], summary: HessianSummary) {
    report.hessian_pd = summary.positive_definite;
    if let (Some(se), Some(corr)) = (summary.std_errors, summary.correlation) {
        let estimates = report.estimates;
        let cis: Vec<(f64, f64)> = free
            .iter()
            .zip(&se)
            .map(|(&i, &s)| wald_ci(transform_for(i), estimates.get(i), s))
            .collect();
        let z: Vec<f64> = free
            .iter()
            .zip(&se)
            .map(|(&i, &s)| {
                let est = estimates.get(i);
                let se_raw = match transform_for(i) {
                    Transform::Log => s * est.abs(),
                    Transform::Identity => s,
                };
                if se_raw > 0.0 {
                    est / se_raw
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let p = free.len();
        let corr_rows: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| corr[(i, j)]).collect())
            .collect();
        report.std_errors = Some(se);
        report.wald_ci95 = Some(cis);
        report.z_scores = Some(z);
        report.correlation = Some(corr_rows);
    } else {
        report.warnings.push(
            "Hessian not positive definite; standard errors and correlations omitted \
             (consider profile likelihood)"
                .into(),
        );
    }
}

/// Central finite-difference Hessian of `f` at `z`.
///
/// Per-coordinate steps are `rel_step * max(1, |z_i|)`. The four-point
/// stencil is symmetric in `(i, j)`, so the returned matrix is symmetric by
/// construction. Entries are evaluated in parallel when `threads > 1`.
pub fn fd_hessian<F>(f: &F, z: &[f64], rel_step: f64, threads: usize) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let p = z.len();
    let steps: Vec<f64> = z.iter().map(|zi| rel_step * zi.abs().max(1.0)).collect();
    let f0 = f(z);

    // Flatten the upper triangle (including the diagonal) into work items.
    let mut pairs = Vec::with_capacity(p * (p + 1) / 2);
    for i in 0..p {
        for j in i..p {
            pairs.push((i, j));
        }
    }
    let entries = run_indexed(pairs.len(), threads, |k| {
        let (i, j) = pairs[k];
        let mut zp = z.to_vec();
        if i == j {
            zp[i] = z[i] + steps[i];
            let fp = f(&zp);
            zp[i] = z[i] - steps[i];
            let fm = f(&zp);
            (fp - 2.0 * f0 + fm) / (steps[i] * steps[i])
        } else {
            zp[i] = z[i] + steps[i];
            zp[j] = z[j] + steps[j];
            let fpp = f(&zp);
            zp[j] = z[j] - steps[j];
            let fpm = f(&zp);
            zp[i] = z[i] - steps[i];
            zp[j] = z[j] + steps[j];
            let fmp = f(&zp);
            zp[j] = z[j] - steps[j];
            let fmm = f(&zp);
            (fpp - fpm - fmp + fmm) / (4.0 * steps[i] * steps[j])
        }
    });

    let mut h = DMatrix::zeros(p, p);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        h[(i, j)] = entries[k];
        h[(j, i)] = entries[k];
    }
    h
}

/// Inverts a symmetric Hessian into covariance, standard errors, and a
/// correlation matrix with exact unit diagonal. `None` when the matrix is
/// not positive definite.
pub fn covariance_from_hessian(h: &DMatrix<f64>) -> Option<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let sym = (h + h.transpose()) * 0.5;
    let chol = sym.cholesky()?;
    let cov = chol.inverse();
    let p = cov.nrows();
    let se: Vec<f64> = (0..p).map(|i| cov[(i, i)].sqrt()).collect();
    if se.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return None;
    }
    let mut corr = DMatrix::zeros(p, p);
    for i in 0..p {
        corr[(i, i)] = 1.0;
        for j in 0..i {
            // One value per pair keeps the matrix exactly symmetric.
            let value = 0.5 * (cov[(i, j)] + cov[(j, i)]) / (se[i] * se[j]);
            corr[(i, j)] = value;
            corr[(j, i)] = value;
        }
    }
    Some((cov, se, corr))
}

/// Hessian-based uncertainty summary at a fitted point.
#[derive(Debug, Clone)]
pub struct HessianSummary {
    pub hessian: DMatrix<f64>,
    pub covariance: Option<DMatrix<f64>>,
    pub std_errors: Option<Vec<f64>>,
    pub correlation: Option<DMatrix<f64>>,
    pub positive_definite: bool,
}

/// Computes the finite-difference Hessian of the negative log-likelihood
/// over the free parameters at `p_hat` and decomposes its inverse.
pub fn hessian_covariance(
    p_hat: &ThermalParams,
    data: &Dataset,
    spec: &FitSpec,
) -> Result<HessianSummary> {
    p_hat.validate()?;
    let free = spec.free_indices();
    let base = *p_hat;
    let objective = |z: &[f64]| {
        let p = assemble(&base, &free, z);
        neg_log_lik(&p, data, spec.substeps)
    };
    let z_hat: Vec<f64> = free
        .iter()
        .map(|&i| to_internal(transform_for(i), p_hat.get(i)))
        .collect();
    let hessian = fd_hessian(&objective, &z_hat, spec.hessian_step, spec.threads);
    let decomposed = covariance_from_hessian(&hessian);
    let positive_definite = decomposed.is_some();
    let (covariance, std_errors, correlation) = match decomposed {
        Some((c, s, r)) => (Some(c), Some(s), Some(r)),
        None => (None, None, None),
    };
    Ok(HessianSummary {
        hessian,
        covariance,
        std_errors,
        correlation,
        positive_definite,
    })
}

/// 95% Wald interval: `estimate +/- 1.96 se` computed on the transformed
/// scale, endpoints mapped back to raw values.
pub fn wald_ci(t: Transform, estimate: f64, std_error: f64) -> (f64, f64) {
    debug_assert!(std_error >= 0.0);
    let z = to_internal(t, estimate);
    (
        to_raw(t, z - 1.96 * std_error),
        to_raw(t, z + 1.96 * std_error),
    )
}

/// Partial retune: refits `free_mask` starting from the baseline estimates,
/// holding everything else at the baseline values, and records the relative
/// change of each retuned parameter.
pub fn retune(
    baseline: &FitReport,
    data: &Dataset,
    free_mask: [bool; PARAM_COUNT],
    template: &FitSpec,
) -> Result<FitReport> {
    if !baseline.converged {
        return Err(Error::InvalidConfig(
            "retune requires a converged baseline fit".into(),
        ));
    }
    let spec = FitSpec {
        init: baseline.estimates,
        free_mask,
        optimizer: OptimizerOptions {
            initial_step: WARM_INITIAL_STEP,
            ..template.optimizer
        },
        ..*template
    };
    let mut report = fit(&spec, data)?;
    let old = baseline.estimates.to_array();
    let new = report.estimates.to_array();
    let changes: Vec<RelativeChange> = (0..PARAM_COUNT)
        .filter(|&i| free_mask[i])
        .map(|i| RelativeChange {
            name: PARAM_NAMES[i].to_string(),
            old: old[i],
            new: new[i],
            relative: (new[i] - old[i]) / old[i],
        })
        .collect();
    report.relative_changes = Some(changes);
    Ok(report)
}
