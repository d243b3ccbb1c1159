//! Unit conversions and physical constants.
//!
//! The library works in angular frequencies, rad/ns, everywhere. Rates
//! quoted in the lab as "f GHz" mean f = omega/2pi, so the round trip is
//! omega[rad/ns] = 2pi * f[GHz]. This module is the only place that
//! conversion is allowed to happen; everything below the CLI boundary
//! assumes rad/ns.

use std::f64::consts::TAU;

/// Planck constant times speed of light, in J*nm.
///
/// hc = 6.62607015e-34 J*s * 2.99792458e8 m/s, expressed per nanometer
/// of wavelength so that `HC_J_NM / lambda_nm` is a photon energy in J.
pub const HC_J_NM: f64 = 1.986_445_857e-16;

/// Speed of light in nm/ns (= m/s * 1e-9 * 1e9).
pub const C_NM_PER_NS: f64 = 2.997_924_58e8;

/// Convert a lab-frame frequency or rate f = omega/2pi in GHz to rad/ns.
pub fn ghz_to_radns(f_ghz: f64) -> f64 {
    TAU * f_ghz
}

/// Convert an angular frequency in rad/ns back to f = omega/2pi in GHz.
pub fn radns_to_ghz(omega_radns: f64) -> f64 {
    omega_radns / TAU
}
