//! Ready-made operating points: a diamond nanosphere in a high-finesse
//! 1064 nm cavity, at the settings used by the two sweep protocols.

use std::f64::consts::PI;

use crate::constants::Constants;
use crate::params::{
    CavitySpec, Coupling, CslSpec, DriveSpec, EnvironmentSpec, NanosphereSpec, SystemSpec,
    TrapDrive, TrapSpec,
};

pub const WAVELENGTH: f64 = 1064e-9;
pub const FINESSE: f64 = 1e5;
pub const NUMERICAL_APERTURE: f64 = 0.6;
pub const DIAMOND_DENSITY: f64 = 3500.0;
pub const DIAMOND_PERMITTIVITY: f64 = 5.76;
pub const CORRELATION_LENGTH: f64 = 100e-9;

pub fn diamond(radius: f64) -> NanosphereSpec {
    NanosphereSpec {
        radius,
        density: DIAMOND_DENSITY,
        permittivity: DIAMOND_PERMITTIVITY,
    }
}

pub fn cavity(length: f64, mirror_curvature: f64) -> CavitySpec {
    CavitySpec {
        length,
        mirror_curvature,
        finesse: FINESSE,
        wavelength: WAVELENGTH,
    }
}

pub fn trap(omega: f64, wavelength: f64) -> TrapSpec {
    TrapSpec {
        numerical_aperture: NUMERICAL_APERTURE,
        drive: TrapDrive::Frequency(omega),
        wavelength,
    }
}

/// Linewidth of [`cavity`] at the given length, rad/s.
pub fn linewidth(length: f64) -> f64 {
    PI * Constants::CODATA.c / (2.0 * FINESSE * length)
}

/// Trap-frequency protocol: `L = R_c = 1 cm`, `Δ = 0.01κ`, trap at 2π·1 kHz.
pub fn frequency_protocol(
    radius: f64,
    coupling_ratio: f64,
    temperature: f64,
    pressure_torr: f64,
    rate: f64,
) -> SystemSpec {
    SystemSpec {
        sphere: diamond(radius),
        cavity: cavity(0.01, 0.01),
        trap: trap(2.0 * PI * 1e3, WAVELENGTH),
        drive: DriveSpec {
            detuning_ratio: 0.01,
            coupling: Coupling::Ratio(coupling_ratio),
        },
        environment: EnvironmentSpec::air(
            temperature,
            pressure_torr * Constants::CODATA.torr_to_pascal,
        ),
        csl: CslSpec {
            rate,
            correlation_length: CORRELATION_LENGTH,
            enabled: true,
        },
    }
}

/// Cavity-length protocol: `R_c = 2 cm`, base point `L = R_c`, `T = 100 mK`,
/// `R = r_c`, with `ω = Δ = omega_ratio·κ`.
pub fn length_protocol(
    omega_ratio: f64,
    coupling_ratio: f64,
    pressure_torr: f64,
    rate: f64,
) -> SystemSpec {
    let rc = 0.02;
    let mut spec = frequency_protocol(CORRELATION_LENGTH, coupling_ratio, 0.1, pressure_torr, rate);
    spec.cavity = cavity(rc, rc);
    spec.trap.drive = TrapDrive::Frequency(omega_ratio * linewidth(rc));
    spec.drive.detuning_ratio = omega_ratio;
    spec
}

/// `R = r_c = 100 nm`, `G = 0.01κ`, `T = 1 K`, `P_a = 10⁻¹⁰ Torr`,
/// `λ = 10⁻⁸ s⁻¹`, trap at 2π·1 kHz.
pub fn reference_system() -> SystemSpec {
    frequency_protocol(CORRELATION_LENGTH, 0.01, 1.0, 1e-10, 1e-8)
}
