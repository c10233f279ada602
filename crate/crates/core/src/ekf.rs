//! Continuous-discrete extended Kalman filter.
//!
//! Between samples the state mean follows the drift ODE and the covariance
//! follows the Lyapunov equation `dP/dt = A P + P A' + Q`, both integrated
//! with a classical fourth-order Runge-Kutta scheme over equal
//! sub-intervals with the input (and hence the sigmoid) held at its
//! start-of-interval value. Measurement updates use the Joseph form.
//!
//! The negative log-likelihood follows the Gaussian prediction-error
//! decomposition. The filter is initialized at the first observation with a
//! diffuse-but-finite prior, and the first innovation is excluded from the
//! likelihood, which removes the unspecified initial-state density term.

use nalgebra::{Matrix3, Vector3};

use crate::model::{
    drift, hypothetical_evaporator_temp, jacobian_state, Dataset, InputRecord, InputSeries,
    StateVector, ThermalParams,
};
use crate::{Error, Result};

/// Default sub-intervals per 1-minute sample for moment propagation.
pub const DEFAULT_SUBSTEPS: usize = 10;

/// Samples excluded from likelihood-sensitive summaries while the diffuse
/// initialization washes out.
pub const BURN_IN: usize = 10;

/// Diffuse-but-finite default prior covariance: the chamber state is pinned
/// near the first observation, the hidden states are loose.
pub const INIT_COV_DIAG: [f64; 3] = [1.0, 25.0, 25.0];

/// Relative tolerance for the covariance PSD guard: eigenvalue deficits
/// beyond this fraction of the covariance scale are a numerical failure;
/// smaller dips are clamped back onto the PSD cone.
const PSD_TOL: f64 = 1e-6;

/// Filter state: mean, covariance, and the sample time it refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub mean: StateVector,
    pub cov: Matrix3<f64>,
    /// Minutes since series start.
    pub t: f64,
}

impl FilterState {
    pub fn new(mean: StateVector, cov: Matrix3<f64>, t: f64) -> Self {
        Self { mean, cov, t }
    }

    /// Default initialization at the first observation: the chamber mean is
    /// the first measurement, the envelope mean starts at its conditional
    /// steady state between ambient and chamber, the evaporator mean starts
    /// at the hypothetical evaporator temperature, and the covariance is the
    /// diffuse default.
    pub fn diffuse_init(data: &Dataset, p: &ThermalParams) -> Self {
        let y0 = data.observations[0];
        let u0 = data.inputs.get(0);
        let t_w = (u0.t_a / p.r_wa + y0 / p.r_cw) / (1.0 / p.r_wa + 1.0 / p.r_cw);
        let mean = StateVector::new(y0, t_w, hypothetical_evaporator_temp(p, u0));
        let cov = Matrix3::from_diagonal(&Vector3::new(
            INIT_COV_DIAG[0],
            INIT_COV_DIAG[1],
            INIT_COV_DIAG[2],
        ));
        Self::new(mean, cov, u0.t_min)
    }
}

/// One full filter sweep over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPass {
    /// One-step prediction errors, one per observation. The first entry is
    /// the innovation against the initial state and is excluded from the
    /// likelihood.
    pub innovations: Vec<f64>,
    /// One-step prediction variances of the observation.
    pub innovation_variances: Vec<f64>,
    /// Post-update filter states.
    pub filtered_states: Vec<FilterState>,
    /// One-step predicted observations (prior chamber mean).
    pub predicted_observations: Vec<f64>,
    /// Negative log-likelihood over samples 1..N.
    pub neg_log_lik: f64,
}

impl FilterPass {
    /// Recomputes the negative log-likelihood from the stored innovation
    /// sequences using the same first-sample-excluded convention.
    pub fn recompute_neg_log_lik(&self) -> f64 {
        nll_from_sequences(&self.innovations, &self.innovation_variances)
    }

    /// Standardized innovations after burn-in.
    pub fn standardized_residuals(&self, burn_in: usize) -> Vec<f64> {
        self.innovations
            .iter()
            .zip(&self.innovation_variances)
            .skip(burn_in.max(1))
            .map(|(e, r)| e / r.sqrt())
            .collect()
    }
}

fn nll_from_sequences(innovations: &[f64], variances: &[f64]) -> f64 {
    innovations
        .iter()
        .zip(variances)
        .skip(1)
        .map(|(e, r)| 0.5 * e * e / r + 0.5 * (2.0 * std::f64::consts::PI * r).ln())
        .sum()
}

/// Smallest eigenvalue of a symmetric 3x3 matrix, closed form.
fn sym3_min_eigenvalue(m: &Matrix3<f64>) -> f64 {
    let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
    if p1 == 0.0 {
        return m[(0, 0)].min(m[(1, 1)]).min(m[(2, 2)]);
    }
    let q = m.trace() / 3.0;
    let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (m - Matrix3::from_diagonal_element(q)) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    // Smallest root of the shifted characteristic cubic.
    q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos()
}

fn symmetrize(m: &mut Matrix3<f64>) {
    *m = (*m + m.transpose()) * 0.5;
}

/// Validates a filter state and clamps marginally negative covariance
/// eigenvalues (an artifact of explicit moment integration when one state
/// is known almost exactly) back to zero.
fn finalize(fs: &mut FilterState) -> Result<()> {
    if !fs.mean.is_finite() || fs.cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            sample: 0,
            reason: "non-finite filter state".into(),
        });
    }
    let scale = 1.0 + fs.cov.trace().abs();
    let min_eig = sym3_min_eigenvalue(&fs.cov);
    if min_eig < -PSD_TOL * scale {
        return Err(Error::Numerical {
            sample: 0,
            reason: "covariance lost positive semidefiniteness".into(),
        });
    }
    if min_eig < 0.0 {
        let mut eig = fs.cov.symmetric_eigen();
        for v in eig.eigenvalues.iter_mut() {
            *v = v.max(0.0);
        }
        fs.cov = eig.recompose();
        symmetrize(&mut fs.cov);
    }
    debug_assert!(sym3_min_eigenvalue(&fs.cov) >= -1e-8 * scale);
    Ok(())
}

/// Propagates mean and covariance from `fs.t` to `fs.t + dt` under the input
/// record governing the interval (zero-order hold).
///
/// `dm/dt = f(m)` and `dP/dt = A P + P A' + Q` are integrated jointly with
/// RK4 over `substeps` equal sub-intervals; the covariance is symmetrized
/// after every sub-step.
pub fn propagate(
    fs: &FilterState,
    p: &ThermalParams,
    u: &InputRecord,
    dt: f64,
    substeps: usize,
) -> Result<FilterState> {
    debug_assert!(dt > 0.0 && substeps >= 1);
    let a = jacobian_state(p, u);
    let q = Matrix3::from_diagonal(&Vector3::new(
        p.sigma_c * p.sigma_c,
        p.sigma_w * p.sigma_w,
        p.sigma_e * p.sigma_e,
    ));
    let h = dt / substeps as f64;

    let mean_rate = |x: &Vector3<f64>| drift(&StateVector::from_vector(*x), p, u).to_vector();
    let cov_rate = |cov: &Matrix3<f64>| a * cov + cov * a.transpose() + q;

    let mut x = fs.mean.to_vector();
    let mut cov = fs.cov;
    for _ in 0..substeps {
        let k1x = mean_rate(&x);
        let k1p = cov_rate(&cov);
        let k2x = mean_rate(&(x + k1x * (h / 2.0)));
        let k2p = cov_rate(&(cov + k1p * (h / 2.0)));
        let k3x = mean_rate(&(x + k2x * (h / 2.0)));
        let k3p = cov_rate(&(cov + k2p * (h / 2.0)));
        let k4x = mean_rate(&(x + k3x * h));
        let k4p = cov_rate(&(cov + k3p * h));
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        cov += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
        symmetrize(&mut cov);
    }

    let mut out = FilterState::new(StateVector::from_vector(x), cov, fs.t + dt);
    finalize(&mut out)?;
    Ok(out)
}

/// Measurement update against an observed chamber temperature.
///
/// Returns the posterior state, the innovation, and the innovation variance
/// `R = P[0,0] + nu`. Uses the Joseph-form covariance update.
pub fn update(fs: &FilterState, y: f64, nu: f64) -> Result<(FilterState, f64, f64)> {
    let r_pred = fs.cov[(0, 0)] + nu;
    if !(r_pred > 0.0) {
        return Err(Error::Numerical {
            sample: 0,
            reason: format!("nonpositive innovation variance {r_pred}"),
        });
    }
    let innovation = y - fs.mean.t_c;
    // Observation row h = [1, 0, 0]: the gain is the first covariance column
    // scaled by 1/R.
    let gain: Vector3<f64> = fs.cov.column(0) / r_pred;
    let mean: Vector3<f64> = fs.mean.to_vector() + gain * innovation;

    let mut i_kh: Matrix3<f64> = Matrix3::identity();
    for i in 0..3 {
        i_kh[(i, 0)] -= gain[i];
    }
    let joseph: Matrix3<f64> = i_kh * fs.cov * i_kh.transpose();
    let mut cov: Matrix3<f64> = joseph + gain * gain.transpose() * nu;
    symmetrize(&mut cov);

    let mut out = FilterState::new(StateVector::from_vector(mean), cov, fs.t);
    finalize(&mut out)?;
    Ok((out, innovation, r_pred))
}

/// Runs the filter over a full dataset: update at the first sample, then
/// propagate/update for each subsequent sample.
///
/// The negative log-likelihood is
/// `sum_k [ eps_k^2 / (2 R_k) + log(2 pi R_k) / 2 ]` over `k = 1..N`,
/// excluding the initial innovation.
pub fn filter_pass(
    p: &ThermalParams,
    data: &Dataset,
    init: FilterState,
    substeps: usize,
) -> Result<FilterPass> {
    p.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput {
            index: 0,
            reason: "dataset must be nonempty".into(),
        });
    }
    let n = data.len();
    let dt = data.inputs.dt();
    let mut innovations = Vec::with_capacity(n);
    let mut variances = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut predicted = Vec::with_capacity(n);

    let mut fs = init;
    for k in 0..n {
        if k > 0 {
            let u = data.inputs.get(k - 1);
            fs = propagate(&fs, p, u, dt, substeps).map_err(|e| e.at_sample(k))?;
        }
        predicted.push(fs.mean.t_c);
        let (posterior, innovation, r_pred) =
            update(&fs, data.observations[k], p.nu).map_err(|e| e.at_sample(k))?;
        fs = posterior;
        innovations.push(innovation);
        variances.push(r_pred);
        states.push(fs);
    }

    let neg_log_lik = nll_from_sequences(&innovations, &variances);
    Ok(FilterPass {
        innovations,
        innovation_variances: variances,
        filtered_states: states,
        predicted_observations: predicted,
        neg_log_lik,
    })
}

/// Unconditional prediction over an input horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub t_min: Vec<f64>,
    /// Predicted state means, one per sample.
    pub states: Vec<StateVector>,
    /// Chamber-state variance per sample.
    pub tc_var: Vec<f64>,
    /// 95% interval bounds for the observed chamber temperature,
    /// `mean +/- 1.96 sqrt(P[0,0] + nu)`.
    pub lo95: Vec<f64>,
    pub hi95: Vec<f64>,
}

impl Prediction {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn t_c(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t_c).collect()
    }
}

/// Propagates from known initial states over the whole horizon using only
/// the exogenous inputs, with no measurement updates.
pub fn unconditional_predict(
    p: &ThermalParams,
    inputs: &InputSeries,
    x0: StateVector,
    substeps: usize,
) -> Result<Prediction> {
    p.validate()?;
    if !x0.is_finite() {
        return Err(Error::InvalidInput {
            index: 0,
            reason: "initial state must be finite".into(),
        });
    }
    let dt = inputs.dt();
    let n = inputs.len();
    let mut fs = FilterState::new(x0, Matrix3::zeros(), inputs.get(0).t_min);
    let mut t_min = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut tc_var = Vec::with_capacity(n);
    let mut lo95 = Vec::with_capacity(n);
    let mut hi95 = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            fs = propagate(&fs, p, inputs.get(k - 1), dt, substeps).map_err(|e| e.at_sample(k))?;
        }
        let half_width = 1.96 * (fs.cov[(0, 0)] + p.nu).sqrt();
        t_min.push(fs.t);
        states.push(fs.mean);
        tc_var.push(fs.cov[(0, 0)]);
        lo95.push(fs.mean.t_c - half_width);
        hi95.push(fs.mean.t_c + half_width);
    }
    Ok(Prediction {
        t_min,
        states,
        tc_var,
        lo95,
        hi95,
    })
}
