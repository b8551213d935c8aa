//! Unit conversions at the user boundary.
//!
//! Everything user-facing is an ordinary frequency ν = ω/2π in GHz, times
//! are in ns. Internally all generators work in angular units (rad/ns).

use std::f64::consts::TAU;

/// GHz (ordinary frequency) to rad/ns.
#[inline]
pub fn ghz_to_angular(nu_ghz: f64) -> f64 {
    TAU * nu_ghz
}

/// rad/ns to GHz.
#[inline]
pub fn angular_to_ghz(omega: f64) -> f64 {
    omega / TAU
}

#[inline]
pub fn ps_to_ns(ps: f64) -> f64 {
    ps * 1e-3
}
