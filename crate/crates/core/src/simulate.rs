//! Synthetic data generation: closed-loop SDE sample paths under a
//! thermostat controller, with first-order-lag synthetic exogenous inputs
//! and Gaussian measurement noise.
//!
//! The simulator stands in for real freezer telemetry. Inputs are generated
//! online because the compressor state feeds back from the simulated chamber
//! temperature through the thermostat.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::model::{
    drift, transform_signal, Dataset, InputRecord, InputSeries, StateVector, ThermalParams,
};
use crate::{Error, Result};

/// Divergence guard: any simulated state beyond this magnitude aborts.
const DIVERGENCE_LIMIT: f64 = 1e3;

/// Shapes of the synthetic exogenous inputs.
///
/// The ambient temperature is a constant plus a small daily sinusoid. The
/// evaporator inlet/outlet temperatures relax with first-order lags toward a
/// cold level while the compressor runs and toward a warm near-chamber level
/// while it is off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputProfile {
    pub t_a_mean: f64,
    pub t_a_amplitude: f64,
    pub t_a_period_min: f64,
    pub e_in_cold: f64,
    pub e_in_warm: f64,
    pub e_in_lag_on: f64,
    pub e_in_lag_off: f64,
    pub e_out_cold: f64,
    pub e_out_warm: f64,
    pub e_out_lag_on: f64,
    pub e_out_lag_off: f64,
}

impl Default for InputProfile {
    fn default() -> Self {
        Self {
            t_a_mean: 22.0,
            t_a_amplitude: 2.5,
            t_a_period_min: 1440.0,
            e_in_cold: -95.0,
            e_in_warm: -76.0,
            e_in_lag_on: 3.0,
            e_in_lag_off: 9.0,
            e_out_cold: -86.0,
            e_out_warm: -72.0,
            e_out_lag_on: 16.0,
            e_out_lag_off: 28.0,
        }
    }
}

/// Simulation configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Thermostat set-point, degC.
    pub setpoint: f64,
    /// Hysteresis half-width around the set-point, degC.
    pub deadband: f64,
    /// Total simulated span, minutes.
    pub duration_min: f64,
    /// Sample interval, minutes.
    pub sample_dt: f64,
    /// Euler-Maruyama sub-intervals per sample.
    pub substeps: usize,
    /// RNG seed; identical configs reproduce identical outputs.
    pub seed: u64,
    pub input_profile: InputProfile,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            setpoint: -80.0,
            deadband: 0.5,
            duration_min: 1440.0,
            sample_dt: 1.0,
            substeps: 10,
            seed: 0,
            input_profile: InputProfile::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_min > 0.0) {
            return Err(Error::InvalidConfig("duration_min must be > 0".into()));
        }
        if !(self.sample_dt > 0.0) {
            return Err(Error::InvalidConfig("sample_dt must be > 0".into()));
        }
        if self.substeps < 1 {
            return Err(Error::InvalidConfig("substeps must be >= 1".into()));
        }
        if !(self.deadband >= 0.0) {
            return Err(Error::InvalidConfig("deadband must be >= 0".into()));
        }
        Ok(())
    }

    fn sample_count(&self) -> usize {
        (self.duration_min / self.sample_dt).round().max(1.0) as usize
    }
}

/// Output of one closed-loop simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub inputs: InputSeries,
    pub true_states: Vec<StateVector>,
    pub observations: Vec<f64>,
    pub truth_params: ThermalParams,
}

impl SimOutput {
    /// Packs inputs and observations into the dataset form consumed by the
    /// filter and estimator.
    pub fn dataset(&self) -> Dataset {
        Dataset::new(self.inputs.clone(), self.observations.clone())
            .expect("simulator output is a valid dataset")
    }
}

/// Hysteresis thermostat: ON above `setpoint + deadband`, OFF below
/// `setpoint - deadband`, previous state inside the band.
pub fn thermostat(t_c: f64, m_prev: u8, setpoint: f64, deadband: f64) -> u8 {
    if t_c > setpoint + deadband {
        1
    } else if t_c < setpoint - deadband {
        0
    } else {
        m_prev
    }
}

/// Documented default truth parameters for synthetic studies.
///
/// Calibrated so that the closed loop under [`SimConfig::default`] produces
/// duty cycles of a few tens of minutes with the chamber held near -80 degC;
/// frozen as a regression fixture. Rates are per minute.
pub fn default_truth_params() -> ThermalParams {
    ThermalParams {
        a: 0.3,
        b: 0.7,
        c_c: 20.0,
        c_w: 50.0,
        c_e: 5.0,
        r_wa: 20.0,
        r_ce: 4.0,
        r_cw: 50.0,
        alpha: 0.8,
        beta: 3.0,
        sigma_c: 0.012,
        sigma_w: 0.015,
        sigma_e: 0.05,
        nu: 0.01,
    }
}

/// One first-order relaxation step toward the active target level.
fn lag_step(current: f64, m: u8, cold: f64, warm: f64, lag_on: f64, lag_off: f64, dt: f64) -> f64 {
    let (target, tau) = if m == 1 { (cold, lag_on) } else { (warm, lag_off) };
    current + (target - current) * (1.0 - (-dt / tau).exp())
}

fn ambient_at(profile: &InputProfile, t_min: f64) -> f64 {
    profile.t_a_mean
        + profile.t_a_amplitude * (2.0 * std::f64::consts::PI * t_min / profile.t_a_period_min).sin()
}

/// Generates the exogenous input series for a given compressor sequence.
///
/// Shares its per-step recursions with [`simulate_sde`], so recomputing the
/// inputs from a simulated compressor sequence reproduces the simulated
/// series exactly.
pub fn synth_inputs(cfg: &SimConfig, m: &[u8]) -> Result<InputSeries> {
    cfg.validate()?;
    if m.is_empty() {
        return Err(Error::InvalidInput {
            index: 0,
            reason: "compressor sequence must be nonempty".into(),
        });
    }
    let profile = &cfg.input_profile;
    let mut t_a = Vec::with_capacity(m.len());
    let mut e_in = Vec::with_capacity(m.len());
    let mut e_out = Vec::with_capacity(m.len());
    let mut cur_in = if m[0] == 1 { profile.e_in_cold } else { profile.e_in_warm };
    let mut cur_out = if m[0] == 1 { profile.e_out_cold } else { profile.e_out_warm };
    for (k, &mk) in m.iter().enumerate() {
        let t_min = cfg.sample_dt * k as f64;
        t_a.push(ambient_at(profile, t_min));
        e_in.push(cur_in);
        e_out.push(cur_out);
        cur_in = lag_step(
            cur_in,
            mk,
            profile.e_in_cold,
            profile.e_in_warm,
            profile.e_in_lag_on,
            profile.e_in_lag_off,
            cfg.sample_dt,
        );
        cur_out = lag_step(
            cur_out,
            mk,
            profile.e_out_cold,
            profile.e_out_warm,
            profile.e_out_lag_on,
            profile.e_out_lag_off,
            cfg.sample_dt,
        );
    }
    InputSeries::assemble(0.0, cfg.sample_dt, &t_a, &e_in, &e_out, &m.to_vec())
}

/// Closed-loop Euler-Maruyama simulation of the freezer SDE.
///
/// At each sample the thermostat switches the compressor from the current
/// true chamber temperature, the accumulated signal and exogenous inputs are
/// stepped, and the states advance over `substeps` sub-intervals
/// `x <- x + f(x) h + sigma sqrt(h) z`. Observations add i.i.d. Gaussian
/// measurement noise with variance `nu`. Deterministic given the seed.
pub fn simulate_sde(p: &ThermalParams, cfg: &SimConfig) -> Result<SimOutput> {
    p.validate()?;
    cfg.validate()?;
    let n = cfg.sample_count();
    let profile = &cfg.input_profile;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    // Initial conditions: chamber at the set-point, envelope at its
    // steady-state level, evaporator at the hypothetical warm level.
    let t_a0 = ambient_at(profile, 0.0);
    let t_c0 = cfg.setpoint;
    let t_w0 = (t_a0 / p.r_wa + t_c0 / p.r_cw) / (1.0 / p.r_wa + 1.0 / p.r_cw);
    let mut m_prev = 0u8;
    let mut cur_in = profile.e_in_warm;
    let mut cur_out = profile.e_out_warm;
    let mut x = StateVector::new(t_c0, t_w0, p.a * cur_out + p.b * cur_in);
    let mut m_ac_prev = 0.0;

    let mut m_seq = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n);
    let mut true_states = Vec::with_capacity(n);
    let mut observations = Vec::with_capacity(n);

    let h = cfg.sample_dt / cfg.substeps as f64;
    let sqrt_h = h.sqrt();

    for k in 0..n {
        let t_min = cfg.sample_dt * k as f64;
        let m = thermostat(x.t_c, m_prev, cfg.setpoint, cfg.deadband);
        let m_ac = if k == 0 {
            transform_signal(m)
        } else if m_prev == 0 && m == 1 {
            0.0
        } else {
            m_ac_prev + transform_signal(m)
        };
        let u = InputRecord {
            t_min,
            t_a: ambient_at(profile, t_min),
            t_e_in: cur_in,
            t_e_out: cur_out,
            m,
            m_ac,
        };

        true_states.push(x);
        let noise: f64 = rng.sample(StandardNormal);
        observations.push(x.t_c + p.nu.sqrt() * noise);
        records.push(u);
        m_seq.push(m);

        // Advance states across the sample interval with the input held.
        for _ in 0..cfg.substeps {
            let f = drift(&x, p, &u);
            let zc: f64 = rng.sample(StandardNormal);
            let zw: f64 = rng.sample(StandardNormal);
            let ze: f64 = rng.sample(StandardNormal);
            x = StateVector::new(
                x.t_c + f.t_c * h + p.sigma_c * sqrt_h * zc,
                x.t_w + f.t_w * h + p.sigma_w * sqrt_h * zw,
                x.t_e + f.t_e * h + p.sigma_e * sqrt_h * ze,
            );
        }
        if !x.is_finite()
            || x.t_c.abs() > DIVERGENCE_LIMIT
            || x.t_w.abs() > DIVERGENCE_LIMIT
            || x.t_e.abs() > DIVERGENCE_LIMIT
        {
            return Err(Error::SimulationUnstable {
                t_min,
                reason: format!("state left +/-{DIVERGENCE_LIMIT} degC"),
            });
        }

        cur_in = lag_step(
            cur_in,
            m,
            profile.e_in_cold,
            profile.e_in_warm,
            profile.e_in_lag_on,
            profile.e_in_lag_off,
            cfg.sample_dt,
        );
        cur_out = lag_step(
            cur_out,
            m,
            profile.e_out_cold,
            profile.e_out_warm,
            profile.e_out_lag_on,
            profile.e_out_lag_off,
            cfg.sample_dt,
        );
        m_prev = m;
        m_ac_prev = m_ac;
    }

    let inputs = InputSeries::new(records)?;
    Ok(SimOutput {
        inputs,
        true_states,
        observations,
        truth_params: *p,
    })
}

/// Compressor duty-cycle periods (ON start to next ON start), in minutes.
pub fn duty_cycle_periods(inputs: &InputSeries) -> Vec<f64> {
    let records = inputs.records();
    let mut starts = Vec::new();
    for k in 1..records.len() {
        if records[k - 1].m == 0 && records[k].m == 1 {
            starts.push(records[k].t_min);
        }
    }
    starts.windows(2).map(|w| w[1] - w[0]).collect()
}
