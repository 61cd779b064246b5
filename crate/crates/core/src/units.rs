//! Conversion between physical units and the dimensionless units of the model,
//! where rates are measured in Γ_wg and times in 1/Γ_wg.
//!
//! Physical rates are given as ordinary frequencies `ν` with the angular rate
//! `2πν`, and `gamma_wg_hz` is `Γ_wg/2π`.

use std::f64::consts::PI;

/// `2πν` in units of Γ_wg.
pub fn rate_from_hz(hz: f64, gamma_wg_hz: f64) -> f64 {
    hz / gamma_wg_hz
}

pub fn rate_to_hz(rate: f64, gamma_wg_hz: f64) -> f64 {
    rate * gamma_wg_hz
}

/// A duration in seconds expressed in units of 1/Γ_wg.
pub fn time_from_seconds(seconds: f64, gamma_wg_hz: f64) -> f64 {
    seconds * 2.0 * PI * gamma_wg_hz
}

pub fn time_to_seconds(t: f64, gamma_wg_hz: f64) -> f64 {
    t / (2.0 * PI * gamma_wg_hz)
}
