//! Model core: the parameter vector, the 3-state drift and its matrix form,
//! and the compressor signal transforms feeding the sigmoid.
//!
//! The chamber is described by three coupled states `[T_c, T_w, T_e]`
//! (chamber, envelope, local evaporator, all in degrees Celsius) driven by
//! the exogenous inputs `[T_a, T_e_out, T_e_in]` and the compressor state
//! signal. All rate parameters are per minute, matching the 1-minute
//! sampling of the telemetry.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of entries in the full parameter vector.
pub const PARAM_COUNT: usize = 14;

/// Canonical parameter ordering used by masks, bounds, and reports.
pub const PARAM_NAMES: [&str; PARAM_COUNT] = [
    "a", "b", "C_c", "C_w", "C_e", "R_wa", "R_ce", "R_cw", "alpha", "beta", "sigma_c", "sigma_w",
    "sigma_e", "nu",
];

/// Looks up the canonical index of a parameter name.
pub fn param_index(name: &str) -> Option<usize> {
    PARAM_NAMES.iter().position(|&n| n == name)
}

/// Exponent clamp for the sigmoid. exp(±36) keeps `1/(1+exp(x))` strictly
/// inside (0, 1) in f64 while saturating smoothly for large |x|.
const SIGMOID_EXP_CLAMP: f64 = 36.0;

/// Full parameter vector of the freezer model.
///
/// Thermal resistances and capacities carry consistent-but-unspecified
/// units; the model is invariant to a common rescaling of the C and R
/// values, so their absolute magnitudes are not individually meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    /// Weight on the evaporator outlet temperature in the hypothetical
    /// evaporator temperature `a*T_e_out + b*T_e_in`.
    pub a: f64,
    /// Weight on the evaporator inlet temperature.
    pub b: f64,
    /// Chamber heat capacity.
    pub c_c: f64,
    /// Envelope heat capacity.
    pub c_w: f64,
    /// Evaporator inertia parameter.
    pub c_e: f64,
    /// Envelope-ambient thermal resistance.
    pub r_wa: f64,
    /// Chamber-evaporator thermal resistance.
    pub r_ce: f64,
    /// Chamber-envelope thermal resistance.
    pub r_cw: f64,
    /// Sigmoid slope.
    pub alpha: f64,
    /// Sigmoid offset, in accumulated-signal steps.
    pub beta: f64,
    /// Diffusion standard deviation of the chamber state, degC/sqrt(min).
    pub sigma_c: f64,
    /// Diffusion standard deviation of the envelope state.
    pub sigma_w: f64,
    /// Diffusion standard deviation of the evaporator state.
    pub sigma_e: f64,
    /// Measurement noise variance, degC^2.
    pub nu: f64,
}

impl ThermalParams {
    /// Checks the positivity/nonnegativity invariants.
    ///
    /// `a` and `b` are only required to be nonnegative; no `a + b = 1`
    /// constraint is imposed.
    pub fn validate(&self) -> Result<()> {
        let all = self.to_array();
        for (i, v) in all.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "{} is not finite",
                    PARAM_NAMES[i]
                )));
            }
        }
        let strictly_positive = [
            ("C_c", self.c_c),
            ("C_w", self.c_w),
            ("C_e", self.c_e),
            ("R_wa", self.r_wa),
            ("R_ce", self.r_ce),
            ("R_cw", self.r_cw),
            ("alpha", self.alpha),
            ("nu", self.nu),
        ];
        for (name, v) in strictly_positive {
            if v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        let nonnegative = [
            ("a", self.a),
            ("b", self.b),
            ("sigma_c", self.sigma_c),
            ("sigma_w", self.sigma_w),
            ("sigma_e", self.sigma_e),
        ];
        for (name, v) in nonnegative {
            if v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Flattens into the canonical `PARAM_NAMES` ordering.
    pub fn to_array(&self) -> [f64; PARAM_COUNT] {
        [
            self.a,
            self.b,
            self.c_c,
            self.c_w,
            self.c_e,
            self.r_wa,
            self.r_ce,
            self.r_cw,
            self.alpha,
            self.beta,
            self.sigma_c,
            self.sigma_w,
            self.sigma_e,
            self.nu,
        ]
    }

    /// Rebuilds from the canonical ordering.
    pub fn from_array(v: [f64; PARAM_COUNT]) -> Self {
        Self {
            a: v[0],
            b: v[1],
            c_c: v[2],
            c_w: v[3],
            c_e: v[4],
            r_wa: v[5],
            r_ce: v[6],
            r_cw: v[7],
            alpha: v[8],
            beta: v[9],
            sigma_c: v[10],
            sigma_w: v[11],
            sigma_e: v[12],
            nu: v[13],
        }
    }

    /// Reads one parameter by canonical index.
    pub fn get(&self, index: usize) -> f64 {
        self.to_array()[index]
    }

    /// Writes one parameter by canonical index.
    pub fn set(&mut self, index: usize, value: f64) {
        let mut arr = self.to_array();
        arr[index] = value;
        *self = Self::from_array(arr);
    }
}

/// State vector `[T_c, T_w, T_e]` in degrees Celsius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    /// Chamber (RTD) temperature state.
    pub t_c: f64,
    /// Envelope temperature state.
    pub t_w: f64,
    /// Local evaporator temperature state.
    pub t_e: f64,
}

impl StateVector {
    pub fn new(t_c: f64, t_w: f64, t_e: f64) -> Self {
        Self { t_c, t_w, t_e }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.t_c, self.t_w, self.t_e)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.t_c.is_finite() && self.t_w.is_finite() && self.t_e.is_finite()
    }
}

/// One exogenous input sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputRecord {
    /// Minutes since series start.
    pub t_min: f64,
    /// Ambient temperature, degC.
    pub t_a: f64,
    /// Evaporator inlet temperature, degC.
    pub t_e_in: f64,
    /// Evaporator outlet temperature, degC.
    pub t_e_out: f64,
    /// Binary compressor state.
    pub m: u8,
    /// Accumulated transformed compressor signal.
    pub m_ac: f64,
}

/// Maps a binary compressor state to the signed unit signal: 1 -> +1, 0 -> -1.
pub fn transform_signal(m: u8) -> f64 {
    debug_assert!(m <= 1, "compressor state must be binary");
    if m == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Accumulates the transformed compressor signal with the reset rule: the
/// running sum restarts at zero whenever the state shifts from 0 to 1.
///
/// The first sample has no prior shift, so `out[0] = transform_signal(m[0])`.
pub fn accumulate_signal(m: &[u8]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(m.len());
    for (k, &mk) in m.iter().enumerate() {
        if mk > 1 {
            return Err(Error::InvalidInput {
                index: k,
                reason: format!("compressor state must be 0 or 1, got {mk}"),
            });
        }
        let value = if k == 0 {
            transform_signal(mk)
        } else if m[k - 1] == 0 && mk == 1 {
            0.0
        } else {
            out[k - 1] + transform_signal(mk)
        };
        out.push(value);
    }
    Ok(out)
}

/// Logistic sigmoid `1 / (1 + exp(-alpha * (m_ac - beta)))`.
///
/// The exponent is clamped so the output stays strictly inside (0, 1) even
/// for very large |m_ac|.
pub fn sigmoid(alpha: f64, beta: f64, m_ac: f64) -> f64 {
    let arg = (-alpha * (m_ac - beta)).clamp(-SIGMOID_EXP_CLAMP, SIGMOID_EXP_CLAMP);
    1.0 / (1.0 + arg.exp())
}

/// Hypothetical evaporator temperature `a*T_e_out + b*T_e_in`: the imagined
/// local cold-source level the evaporator state relaxes toward.
pub fn hypothetical_evaporator_temp(p: &ThermalParams, u: &InputRecord) -> f64 {
    p.a * u.t_e_out + p.b * u.t_e_in
}

/// Drift of the three states at `x` under input `u`:
///
/// ```text
/// dT_c = ((T_w - T_c)/R_cw + (T_e - T_c)/R_ce) / C_c
/// dT_w = ((T_a - T_w)/R_wa + (T_c - T_w)/R_cw) / C_w
/// dT_e = (a*T_e_out + b*T_e_in - T_e) * S(M_ac) / C_e
/// ```
pub fn drift(x: &StateVector, p: &ThermalParams, u: &InputRecord) -> StateVector {
    let s = sigmoid(p.alpha, p.beta, u.m_ac);
    StateVector {
        t_c: ((x.t_w - x.t_c) / p.r_cw + (x.t_e - x.t_c) / p.r_ce) / p.c_c,
        t_w: ((u.t_a - x.t_w) / p.r_wa + (x.t_c - x.t_w) / p.r_cw) / p.c_w,
        t_e: (hypothetical_evaporator_temp(p, u) - x.t_e) * s / p.c_e,
    }
}

/// State matrix A of the time-variant linear system. Depends on the input
/// only through the sigmoid of `m_ac`.
pub fn jacobian_state(p: &ThermalParams, u: &InputRecord) -> Matrix3<f64> {
    let s = sigmoid(p.alpha, p.beta, u.m_ac);
    Matrix3::new(
        -1.0 / (p.c_c * p.r_cw) - 1.0 / (p.c_c * p.r_ce),
        1.0 / (p.c_c * p.r_cw),
        1.0 / (p.c_c * p.r_ce),
        1.0 / (p.c_w * p.r_cw),
        -1.0 / (p.c_w * p.r_wa) - 1.0 / (p.c_w * p.r_cw),
        0.0,
        0.0,
        0.0,
        -s / p.c_e,
    )
}

/// Input matrix B applied to the input vector `[T_a, T_e_out, T_e_in]`.
pub fn input_matrix(p: &ThermalParams, u: &InputRecord) -> Matrix3<f64> {
    let s = sigmoid(p.alpha, p.beta, u.m_ac);
    Matrix3::new(
        0.0,
        0.0,
        0.0,
        1.0 / (p.c_w * p.r_wa),
        0.0,
        0.0,
        0.0,
        p.a * s / p.c_e,
        p.b * s / p.c_e,
    )
}

/// Input vector `[T_a, T_e_out, T_e_in]` matching [`input_matrix`].
pub fn input_vector(u: &InputRecord) -> Vector3<f64> {
    Vector3::new(u.t_a, u.t_e_out, u.t_e_in)
}

/// Uniformly sampled exogenous input series with a consistent accumulated
/// compressor signal column.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSeries {
    records: Vec<InputRecord>,
}

impl InputSeries {
    /// Builds a series from parallel columns, deriving the accumulated
    /// signal column. Timestamps run `t0, t0+dt, ...`.
    pub fn assemble(
        t0: f64,
        dt: f64,
        t_a: &[f64],
        t_e_in: &[f64],
        t_e_out: &[f64],
        m: &[u8],
    ) -> Result<Self> {
        if t_a.len() != m.len() || t_e_in.len() != m.len() || t_e_out.len() != m.len() {
            return Err(Error::InvalidInput {
                index: 0,
                reason: "input columns must have equal lengths".into(),
            });
        }
        let m_ac = accumulate_signal(m)?;
        let records = (0..m.len())
            .map(|k| InputRecord {
                t_min: t0 + dt * k as f64,
                t_a: t_a[k],
                t_e_in: t_e_in[k],
                t_e_out: t_e_out[k],
                m: m[k],
                m_ac: m_ac[k],
            })
            .collect();
        Self::new(records)
    }

    /// Validates and wraps raw records: nonempty, uniform stride, binary
    /// compressor states, and a stored accumulated signal that matches its
    /// recomputation exactly.
    pub fn new(records: Vec<InputRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput {
                index: 0,
                reason: "input series must be nonempty".into(),
            });
        }
        let dt = if records.len() > 1 {
            records[1].t_min - records[0].t_min
        } else {
            1.0
        };
        if records.len() > 1 && (!dt.is_finite() || dt <= 0.0) {
            return Err(Error::InvalidInput {
                index: 1,
                reason: format!("nonpositive sample stride {dt}"),
            });
        }
        for (k, r) in records.iter().enumerate() {
            if !(r.t_a.is_finite() && r.t_e_in.is_finite() && r.t_e_out.is_finite()) {
                return Err(Error::InvalidInput {
                    index: k,
                    reason: "non-finite temperature input".into(),
                });
            }
            if k > 0 {
                let step = r.t_min - records[k - 1].t_min;
                if (step - dt).abs() > 1e-9 * dt.max(1.0) {
                    return Err(Error::InvalidInput {
                        index: k,
                        reason: format!("non-uniform stride: expected {dt}, got {step}"),
                    });
                }
            }
        }
        let m: Vec<u8> = records.iter().map(|r| r.m).collect();
        let m_ac = accumulate_signal(&m)?;
        for (k, r) in records.iter().enumerate() {
            if r.m_ac != m_ac[k] {
                return Err(Error::InvalidInput {
                    index: k,
                    reason: format!(
                        "stored accumulated signal {} disagrees with recomputation {}",
                        r.m_ac, m_ac[k]
                    ),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sample stride in minutes.
    pub fn dt(&self) -> f64 {
        if self.records.len() > 1 {
            self.records[1].t_min - self.records[0].t_min
        } else {
            1.0
        }
    }

    pub fn records(&self) -> &[InputRecord] {
        &self.records
    }

    pub fn get(&self, k: usize) -> &InputRecord {
        &self.records[k]
    }
}

/// Input series paired with the observed chamber temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: InputSeries,
    pub observations: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: InputSeries, observations: Vec<f64>) -> Result<Self> {
        if observations.len() != inputs.len() {
            return Err(Error::InvalidInput {
                index: observations.len().min(inputs.len()),
                reason: format!(
                    "observation count {} does not match input count {}",
                    observations.len(),
                    inputs.len()
                ),
            });
        }
        if let Some(k) = observations.iter().position(|y| !y.is_finite()) {
            return Err(Error::InvalidInput {
                index: k,
                reason: "non-finite observation".into(),
            });
        }
        Ok(Self {
            inputs,
            observations,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}
