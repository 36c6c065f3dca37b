//! Physical constants and the unit conversions used throughout the crate.
//!
//! Internal conventions:
//! * energies are ordinary frequencies in GHz (value = E/h),
//! * times are in ns,
//! * fluxes are phases in rad (φ = 2πΦ/Φ0),
//! * currents are in nA.
//!
//! The open-system dynamics works with angular frequencies (rad/ns); the
//! conversion is a single factor of 2π and lives here as well.

use std::f64::consts::PI;

/// Fixed SI constants (exact since the 2019 SI redefinition).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants;

impl PhysicalConstants {
    /// Elementary charge, C.
    pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
    /// Planck constant, J·s.
    pub const PLANCK: f64 = 6.626_070_15e-34;
    /// Boltzmann constant, J/K.
    pub const BOLTZMANN: f64 = 1.380_649e-23;
    /// Magnetic flux quantum h/2e, Wb (2.067833848...e-15).
    pub const FLUX_QUANTUM: f64 = Self::PLANCK / (2.0 * Self::ELECTRON_CHARGE);
    /// Reduced Planck constant, J·s.
    pub const HBAR: f64 = Self::PLANCK / (2.0 * PI);
}

const NANO: f64 = 1e-9;
const FEMTO: f64 = 1e-15;

/// Josephson energy scale `I Φ0 / (2π h)` in GHz for a critical current in nA.
pub fn josephson_energy_ghz(current_na: f64) -> f64 {
    current_na * NANO * PhysicalConstants::FLUX_QUANTUM / (2.0 * PI * PhysicalConstants::PLANCK) * NANO
}

/// Charging prefactor `e² / (C h)` in GHz for a capacitance in fF.
pub fn charging_energy_ghz(capacitance_ff: f64) -> f64 {
    let e = PhysicalConstants::ELECTRON_CHARGE;
    e * e / (capacitance_ff * FEMTO * PhysicalConstants::PLANCK) * NANO
}

/// Current (nA) corresponding to an energy-per-phase of 1 GHz/rad, i.e. the
/// factor turning `-∂H/∂φ` (GHz/rad) into a physical current.
pub fn na_per_ghz_per_rad() -> f64 {
    2.0 * PI * PhysicalConstants::PLANCK / PhysicalConstants::FLUX_QUANTUM / NANO / NANO
}

/// Thermal inverse temperature for angular frequencies: `ħ / (k_B T)` in ns.
pub fn beta_angular_ns(temperature_mk: f64) -> f64 {
    PhysicalConstants::HBAR / (PhysicalConstants::BOLTZMANN * temperature_mk * 1e-3) / NANO
}

/// `h ν / (k_B T)` for a frequency in GHz and a temperature in mK.
pub fn reduced_photon_energy(freq_ghz: f64, temperature_mk: f64) -> f64 {
    PhysicalConstants::PLANCK * freq_ghz / NANO / (PhysicalConstants::BOLTZMANN * temperature_mk * 1e-3)
}

pub fn ghz_to_angular(freq_ghz: f64) -> f64 {
    2.0 * PI * freq_ghz
}

pub fn mphi0_to_rad(flux_mphi0: f64) -> f64 {
    2.0 * PI * flux_mphi0 * 1e-3
}

pub fn rad_to_mphi0(phase_rad: f64) -> f64 {
    phase_rad / (2.0 * PI) * 1e3
}

/// Effective temperature `w I_p / k_B` in mK, for an s-curve width in μΦ0 and
/// a persistent current in μA.
pub fn effective_temperature_mk(width_uphi0: f64, current_ua: f64) -> f64 {
    let flux = width_uphi0 * 1e-6 * PhysicalConstants::FLUX_QUANTUM;
    let current = current_ua * 1e-6;
    flux * current / PhysicalConstants::BOLTZMANN * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_quantum_value() {
        assert!((PhysicalConstants::FLUX_QUANTUM - 2.067_833_848e-15).abs() < 1e-23);
    }

    #[test]
    fn josephson_scale_for_228_na() {
        // 228 nA → about 113 GHz
        let e = josephson_energy_ghz(228.0);
        assert!((e - 113.24).abs() < 0.05, "{e}");
    }

    #[test]
    fn photon_energy_at_10mk() {
        let x = reduced_photon_energy(1.0, 10.0);
        assert!((x - 4.799).abs() < 1e-3, "{x}");
        // same number through the angular route
        let y = beta_angular_ns(10.0) * ghz_to_angular(1.0);
        assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn current_conversion_matches_josephson_scale() {
        let i = 228.0;
        let back = josephson_energy_ghz(i) * na_per_ghz_per_rad();
        assert!((back - i).abs() < 1e-9);
    }

    #[test]
    fn flux_units_round_trip() {
        assert!((rad_to_mphi0(mphi0_to_rad(2.58)) - 2.58).abs() < 1e-12);
        assert!((mphi0_to_rad(1000.0) - 2.0 * PI).abs() < 1e-12);
    }
}
