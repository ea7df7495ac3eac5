//! Physical constants and the Hz <-> rad/s boundary conversion.
//!
//! Everything inside the library is an angular frequency or angular rate
//! (rad/s). Configuration files and CSV output use ordinary frequency (Hz).

use std::f64::consts::TAU;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light in vacuum (m/s).
pub const C_LIGHT: f64 = 299_792_458.0;

#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    f * TAU
}

#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TAU
}

/// Bose-Einstein occupation of a mode at angular frequency `omega` and
/// temperature `temperature`.
pub fn bose_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / ((HBAR * omega / (K_B * temperature)).exp_m1())
}
