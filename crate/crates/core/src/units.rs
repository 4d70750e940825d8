//! Unit conversions and the reference working points of the device.
//!
//! Internally every frequency is an angular frequency in rad/s with ħ = 1,
//! so energies and frequencies are interchangeable. "Linear" values such as
//! Ω/2π = 10 MHz are converted once, here.

use std::f64::consts::TAU;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Magnetic flux quantum h/2e, Wb.
pub const FLUX_QUANTUM: f64 = 2.067_833_848e-15;

/// Angular frequency (rad/s) for a linear frequency given in MHz.
pub fn mhz(linear: f64) -> f64 {
    TAU * linear * 1e6
}

/// Angular frequency (rad/s) for a linear frequency given in GHz.
pub fn ghz(linear: f64) -> f64 {
    TAU * linear * 1e9
}

/// Linear frequency in MHz for an angular frequency in rad/s.
pub fn to_mhz(angular: f64) -> f64 {
    angular / TAU / 1e6
}

/// Linear frequency in GHz for an angular frequency in rad/s.
pub fn to_ghz(angular: f64) -> f64 {
    angular / TAU / 1e9
}

/// Rate in 1/s from kHz. Decay rates are plain rates, no 2π.
pub fn khz_rate(rate: f64) -> f64 {
    rate * 1e3
}

pub fn ns(value: f64) -> f64 {
    value * 1e-9
}

pub fn us(value: f64) -> f64 {
    value * 1e-6
}

pub fn to_ns(seconds: f64) -> f64 {
    seconds * 1e9
}

/// Default drive budget, Ω_max/2π = 10 MHz.
pub fn default_omega_max() -> f64 {
    mhz(10.0)
}

/// Reference period 2π/Ω_max used to normalise charging times.
pub fn reference_period(omega_max: f64) -> f64 {
    TAU / omega_max
}

/// Measured transition frequencies (GHz, linear) at the flux sweet spot.
pub const SWEET_SPOT_GE_GHZ: f64 = 2.6612;
pub const SWEET_SPOT_GF_GHZ: f64 = 6.1703;

/// Measured transition frequencies (GHz, linear) at the charging bias 0.496 Φ₀.
pub const CHARGING_BIAS_GE_GHZ: f64 = 2.7123;
pub const CHARGING_BIAS_GF_GHZ: f64 = 6.2180;
