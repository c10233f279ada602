//! Optimizer-facing parameter transforms.
//!
//! Positivity-constrained parameters are optimized on the log scale so the
//! search space is unconstrained in those coordinates; `a`, `b`, and `beta`
//! stay on the raw scale with box bounds. Raw values are what the public
//! types carry.

use crate::model::PARAM_COUNT;

/// Scale a parameter is optimized on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Optimized as log(value); value must be > 0.
    Log,
    /// Optimized on the raw scale.
    Identity,
}

/// Transform for each canonical parameter index.
pub fn transform_for(index: usize) -> Transform {
    debug_assert!(index < PARAM_COUNT);
    match index {
        // a, b, beta
        0 | 1 | 9 => Transform::Identity,
        _ => Transform::Log,
    }
}

/// Raw -> internal.
pub fn to_internal(t: Transform, raw: f64) -> f64 {
    match t {
        Transform::Log => raw.ln(),
        Transform::Identity => raw,
    }
}

/// Internal -> raw.
pub fn to_raw(t: Transform, internal: f64) -> f64 {
    match t {
        Transform::Log => internal.exp(),
        Transform::Identity => internal,
    }
}
