//! Physical constants (CODATA 2018 exact / recommended values) and unit
//! conversion factors.

use serde::Serialize;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const C: f64 = 299_792_458.0;
/// Atomic mass unit.
pub const AMU: f64 = 1.660_539_066_60e-27;
pub const TORR_TO_PASCAL: f64 = 133.322;

/// Bundle of the constants used by the parameter chain.
///
/// Everything in the crate uses [`Constants::CODATA`]; the struct exists so
/// tests can perturb a constant and watch the dependent quantities move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub hbar: f64,
    pub k_b: f64,
    pub c: f64,
    pub amu: f64,
    pub torr_to_pascal: f64,
}

impl Constants {
    pub const CODATA: Constants = Constants {
        hbar: HBAR,
        k_b: K_B,
        c: C,
        amu: AMU,
        torr_to_pascal: TORR_TO_PASCAL,
    };
}

impl Default for Constants {
    fn default() -> Self {
        Self::CODATA
    }
}
