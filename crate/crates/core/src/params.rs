//! System description and the derived SI parameter chain.
//!
//! All inputs and outputs are strict SI with angular frequencies in rad/s.
//! Laboratory units (Torr, mK, cm, kHz) are converted before anything here
//! sees them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{Error, Result};

/// Default gas molecule mass for air, in amu.
pub const AIR_MOLECULE_MASS_AMU: f64 = 28.97;

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::spec(field, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::spec(field, format!("must be finite and >= 0, got {v}")))
    }
}

/// Homogeneous dielectric sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NanosphereSpec {
    /// Radius `R`, m.
    pub radius: f64,
    /// Mass density `ρ₀`, kg/m³.
    pub density: f64,
    /// Relative permittivity `ε`.
    pub permittivity: f64,
}

impl NanosphereSpec {
    pub fn validate(&self) -> Result<()> {
        positive("sphere.radius", self.radius)?;
        positive("sphere.density", self.density)?;
        if !(self.permittivity.is_finite() && self.permittivity > 1.0) {
            return Err(Error::spec(
                "sphere.permittivity",
                format!("must be > 1, got {}", self.permittivity),
            ));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }

    pub fn mass(&self) -> f64 {
        self.density * self.volume()
    }

    /// `(ε − 1)/(ε + 2)`, in (0, 1) for ε > 1.
    pub fn clausius_mossotti(&self) -> f64 {
        (self.permittivity - 1.0) / (self.permittivity + 2.0)
    }

    /// `ε_c = 3(ε − 1)/(ε + 2)`, in (0, 3).
    pub fn eps_c(&self) -> f64 {
        3.0 * self.clausius_mossotti()
    }
}

/// Symmetric two-mirror Fabry-Pérot resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    /// Mirror separation `L`, m.
    pub length: f64,
    /// Mirror radius of curvature `R_c`, m.
    pub mirror_curvature: f64,
    pub finesse: f64,
    /// Cavity wavelength `λ_c`, m.
    pub wavelength: f64,
}

impl CavitySpec {
    pub fn validate(&self) -> Result<()> {
        positive("cavity.length", self.length)?;
        positive("cavity.mirror_curvature", self.mirror_curvature)?;
        positive("cavity.wavelength", self.wavelength)?;
        if !(self.finesse.is_finite() && self.finesse >= 1.0) {
            return Err(Error::spec(
                "cavity.finesse",
                format!("must be >= 1, got {}", self.finesse),
            ));
        }
        let limit = 2.0 * self.mirror_curvature;
        if self.length >= limit {
            return Err(Error::UnstableGeometry {
                length: self.length,
                limit,
            });
        }
        Ok(())
    }
}

/// How the dipole trap strength is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapDrive {
    /// Trap laser power `P_t`, W.
    Power(f64),
    /// Target trapping frequency `ω`, rad/s.
    Frequency(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapSpec {
    /// Numerical aperture `N` of the focusing optics.
    pub numerical_aperture: f64,
    pub drive: TrapDrive,
    /// Trap laser wavelength, m. Conventionally equal to the cavity wavelength.
    pub wavelength: f64,
}

impl TrapSpec {
    pub fn validate(&self) -> Result<()> {
        let na = self.numerical_aperture;
        if !(na.is_finite() && na > 0.0 && na < 1.0) {
            return Err(Error::spec(
                "trap.numerical_aperture",
                format!("must lie in (0, 1), got {na}"),
            ));
        }
        positive("trap.wavelength", self.wavelength)?;
        match self.drive {
            TrapDrive::Power(p) => positive("trap.power", p),
            TrapDrive::Frequency(w) => positive("trap.frequency", w),
        }
    }
}

/// How the linearized optomechanical coupling is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `G/κ`.
    Ratio(f64),
    /// Cavity drive power `P`, W.
    InputPower(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    /// `Δ/κ`; positive (red) detuning.
    pub detuning_ratio: f64,
    pub coupling: Coupling,
}

impl DriveSpec {
    pub fn validate(&self) -> Result<()> {
        positive("drive.detuning_ratio", self.detuning_ratio)?;
        // Zero coupling is allowed: it is the undriven-cavity limit.
        match self.coupling {
            Coupling::Ratio(r) => non_negative("drive.coupling_ratio", r),
            Coupling::InputPower(p) => non_negative("drive.input_power", p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    /// Gas temperature `T`, K.
    pub temperature: f64,
    /// Gas pressure `P_a`, Pa.
    pub pressure: f64,
    /// Gas molecule mass `m_a`, kg.
    pub gas_molecule_mass: f64,
}

impl EnvironmentSpec {
    /// Air at the given temperature (K) and pressure (Pa).
    pub fn air(temperature: f64, pressure: f64) -> Self {
        Self {
            temperature,
            pressure,
            gas_molecule_mass: AIR_MOLECULE_MASS_AMU * Constants::CODATA.amu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("environment.temperature", self.temperature)?;
        non_negative("environment.pressure", self.pressure)?;
        positive("environment.gas_molecule_mass", self.gas_molecule_mass)
    }
}

/// Collapse-model hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CslSpec {
    /// Collapse rate `λ`, s⁻¹.
    pub rate: f64,
    /// Correlation length `r_c`, m.
    pub correlation_length: f64,
    pub enabled: bool,
}

impl CslSpec {
    pub fn validate(&self) -> Result<()> {
        non_negative("csl.rate", self.rate)?;
        positive("csl.correlation_length", self.correlation_length)
    }
}

/// Complete physical description of one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub sphere: NanosphereSpec,
    pub cavity: CavitySpec,
    pub trap: TrapSpec,
    pub drive: DriveSpec,
    pub environment: EnvironmentSpec,
    pub csl: CslSpec,
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        self.sphere.validate()?;
        self.cavity.validate()?;
        self.trap.validate()?;
        self.drive.validate()?;
        self.environment.validate()?;
        self.csl.validate()
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        self.derive_with(&Constants::CODATA)
    }

    pub fn derive_with(&self, k: &Constants) -> Result<DerivedParams> {
        self.validate()?;
        let cav = derive_cavity(&self.cavity, k)?;
        let trap = derive_trap(&self.trap, &self.sphere, k)?;
        let cpl = derive_coupling(self, &cav, trap.omega, k)?;
        let gamma = gas_damping(&self.environment, &self.sphere, k);
        Ok(DerivedParams {
            kappa: cav.kappa,
            mode_waist: cav.mode_waist,
            mode_volume: cav.mode_volume,
            omega_c: cav.omega_c,
            omega_l: cpl.omega_l,
            detuning: cpl.detuning,
            mass: cpl.mass,
            sphere_volume: cpl.sphere_volume,
            bare_coupling: cpl.bare_coupling,
            alpha: cpl.alpha,
            n_ph: cpl.n_ph,
            coupling: cpl.coupling,
            input_power: cpl.input_power,
            omega: trap.omega,
            trap_waist: trap.waist,
            intensity: trap.intensity,
            trap_power: trap.power,
            omega_lt: trap.omega_lt,
            gamma,
            eps_c: self.sphere.eps_c(),
        })
    }

    /// Copy with the CSL switch forced.
    pub fn with_csl(mut self, enabled: bool) -> Self {
        self.csl.enabled = enabled;
        self
    }
}

/// Every quantity the dynamics needs, in SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Cavity linewidth κ, rad/s.
    pub kappa: f64,
    /// Mode waist `W₀`, m.
    pub mode_waist: f64,
    /// Mode volume `V_c`, m³.
    pub mode_volume: f64,
    pub omega_c: f64,
    /// Drive laser angular frequency `ω_L = ω_c − Δ`.
    pub omega_l: f64,
    /// Detuning Δ, rad/s.
    pub detuning: f64,
    pub mass: f64,
    pub sphere_volume: f64,
    /// Single-photon coupling `g`, rad/s.
    pub bare_coupling: f64,
    /// Mean intracavity amplitude (real, ≥ 0).
    pub alpha: f64,
    pub n_ph: f64,
    /// Linearized coupling `G = g α`, rad/s.
    pub coupling: f64,
    /// Cavity drive power, W.
    pub input_power: f64,
    /// Trapping frequency ω, rad/s.
    pub omega: f64,
    pub trap_waist: f64,
    /// Trap intensity `I`, W/m².
    pub intensity: f64,
    pub trap_power: f64,
    /// Trap laser angular frequency `ω_Lt`.
    pub omega_lt: f64,
    /// Gas damping γ, s⁻¹.
    pub gamma: f64,
    pub eps_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityDerived {
    pub kappa: f64,
    pub mode_waist: f64,
    pub mode_volume: f64,
    pub omega_c: f64,
}

/// Linewidth, waist and mode volume of the cavity mode.
pub fn derive_cavity(cavity: &CavitySpec, k: &Constants) -> Result<CavityDerived> {
    cavity.validate()?;
    let l = cavity.length;
    let kappa = PI * k.c / (2.0 * cavity.finesse * l);
    let geometry = (2.0 * cavity.mirror_curvature / l - 1.0).sqrt();
    let mode_waist = (cavity.wavelength * l * geometry / (2.0 * PI)).sqrt();
    let mode_volume = PI * l * mode_waist * mode_waist / 4.0;
    Ok(CavityDerived {
        kappa,
        mode_waist,
        mode_volume,
        omega_c: 2.0 * PI * k.c / cavity.wavelength,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapDerived {
    pub waist: f64,
    pub intensity: f64,
    pub omega: f64,
    pub power: f64,
    pub omega_lt: f64,
}

/// Resolves the dipole trap from either its power or its target frequency.
///
/// `ω² = 4 ε_c I / (ρ₀ c W_t²)` with `I = P_t / (π W_t²)` and
/// `W_t = λ_t / (π N)`.
pub fn derive_trap(trap: &TrapSpec, sphere: &NanosphereSpec, k: &Constants) -> Result<TrapDerived> {
    trap.validate()?;
    sphere.validate()?;
    let waist = trap.wavelength / (PI * trap.numerical_aperture);
    let area = PI * waist * waist;
    let stiffness = 4.0 * sphere.eps_c() / (sphere.density * k.c * waist * waist);
    let (intensity, omega, power) = match trap.drive {
        TrapDrive::Power(p) => {
            let i = p / area;
            (i, (stiffness * i).sqrt(), p)
        }
        TrapDrive::Frequency(w) => {
            let i = w * w / stiffness;
            (i, w, i * area)
        }
    };
    Ok(TrapDerived {
        waist,
        intensity,
        omega,
        power,
        omega_lt: 2.0 * PI * k.c / trap.wavelength,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingDerived {
    pub mass: f64,
    pub sphere_volume: f64,
    pub bare_coupling: f64,
    pub alpha: f64,
    pub n_ph: f64,
    pub coupling: f64,
    pub detuning: f64,
    pub omega_l: f64,
    pub input_power: f64,
}

/// Bare coupling `g`, drive amplitude `α` and linearized coupling `G = gα`.
pub fn derive_coupling(
    spec: &SystemSpec,
    cavity: &CavityDerived,
    omega: f64,
    k: &Constants,
) -> Result<CouplingDerived> {
    spec.drive.validate()?;
    positive("omega", omega)?;
    let sphere = &spec.sphere;
    let kappa = cavity.kappa;
    let sphere_volume = sphere.volume();
    let mass = sphere.density * sphere_volume;
    let detuning = spec.drive.detuning_ratio * kappa;
    let omega_l = cavity.omega_c - detuning;
    let k_c = 2.0 * PI / spec.cavity.wavelength;
    let bare_coupling = cavity.omega_c
        * (k.hbar / (mass * omega)).sqrt()
        * k_c
        * sphere.clausius_mossotti()
        * 3.0
        * sphere_volume
        / (4.0 * cavity.mode_volume);
    // photons per second per watt, times 2κ/(Δ²+κ²)
    let power_to_alpha_sq = 2.0 * kappa / (k.hbar * omega_l * (detuning * detuning + kappa * kappa));

    let (alpha, coupling, input_power) = match spec.drive.coupling {
        Coupling::Ratio(r) => {
            let g_lin = r * kappa;
            if g_lin > 0.0 && !(bare_coupling > 0.0) {
                return Err(Error::spec(
                    "drive.coupling_ratio",
                    "bare coupling is zero; cannot invert for the drive amplitude",
                ));
            }
            let alpha = if g_lin == 0.0 { 0.0 } else { g_lin / bare_coupling };
            (alpha, g_lin, alpha * alpha / power_to_alpha_sq)
        }
        Coupling::InputPower(p) => {
            let alpha = (p * power_to_alpha_sq).sqrt();
            (alpha, bare_coupling * alpha, p)
        }
    };
    Ok(CouplingDerived {
        mass,
        sphere_volume,
        bare_coupling,
        alpha,
        n_ph: alpha * alpha,
        coupling,
        detuning,
        omega_l,
        input_power,
    })
}

/// Mean molecular speed `v̄ = √(3 k_B T / m_a)`.
pub fn mean_gas_speed(env: &EnvironmentSpec, k: &Constants) -> f64 {
    (3.0 * k.k_b * env.temperature / env.gas_molecule_mass).sqrt()
}

/// Gas damping rate `γ = (16/π) P_a / (v̄ R ρ₀)`.
pub fn gas_damping(env: &EnvironmentSpec, sphere: &NanosphereSpec, k: &Constants) -> f64 {
    16.0 / PI * env.pressure / (mean_gas_speed(env, k) * sphere.radius * sphere.density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    const K: Constants = Constants::CODATA;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn linewidth_at_one_centimetre() {
        let cav = presets::cavity(0.01, 0.01);
        let d = derive_cavity(&cav, &K).unwrap();
        assert!(rel(d.kappa, 4.712e5) < 1e-3, "{}", d.kappa);
    }

    #[test]
    fn confocal_waist() {
        let cav = presets::cavity(0.01, 0.01);
        let d = derive_cavity(&cav, &K).unwrap();
        let confocal = (cav.wavelength * cav.length / (2.0 * PI)).sqrt();
        assert!(rel(d.mode_waist, confocal) < 1e-15);
        // independent high-precision evaluation
        assert!(rel(d.mode_waist, 4.115_104_609_238_708e-5) < 1e-12);
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut cav = presets::cavity(0.02, 0.01);
        assert!(matches!(
            derive_cavity(&cav, &K),
            Err(Error::UnstableGeometry { .. })
        ));
        cav.length = 0.0;
        assert!(matches!(
            derive_cavity(&cav, &K),
            Err(Error::InvalidSpec { field: "cavity.length", .. })
        ));
    }

    #[test]
    fn trap_reference_values() {
        let sphere = presets::diamond(100e-9);
        let trap = presets::trap(2.0 * PI * 1e3, 1064e-9);
        let t = derive_trap(&trap, &sphere, &K).unwrap();
        assert!(rel(t.intensity, 1_793_093.830_370_419) < 1e-12);
        assert!(rel(t.power, 1.794_873_719_604_422e-6) < 1e-12);
    }

    #[test]
    fn trap_frequency_vanishes_with_power() {
        let sphere = presets::diamond(100e-9);
        let mut trap = presets::trap(1.0, 1064e-9);
        trap.drive = TrapDrive::Power(1e-30);
        let t = derive_trap(&trap, &sphere, &K).unwrap();
        assert!(t.omega < 1e-3);
        trap.drive = TrapDrive::Power(0.0);
        assert!(derive_trap(&trap, &sphere, &K).is_err());
        trap.drive = TrapDrive::Frequency(-1.0);
        assert!(derive_trap(&trap, &sphere, &K).is_err());
    }

    #[test]
    fn zero_coupling_is_undriven() {
        let mut spec = presets::reference_system();
        spec.drive.coupling = Coupling::Ratio(0.0);
        let d = spec.derive().unwrap();
        assert_eq!(d.alpha, 0.0);
        assert_eq!(d.n_ph, 0.0);
        assert_eq!(d.input_power, 0.0);
        assert_eq!(d.coupling, 0.0);
    }

    #[test]
    fn doubling_radius_scales_coupling() {
        let spec = presets::reference_system();
        let mut big = spec;
        big.sphere.radius *= 2.0;
        let (a, b) = (spec.derive().unwrap(), big.derive().unwrap());
        assert!(rel(b.sphere_volume / a.sphere_volume, 8.0) < 1e-12);
        assert!(rel(b.mass / a.mass, 8.0) < 1e-12);
        assert!(rel(b.bare_coupling / a.bare_coupling, 2.0 * 2f64.sqrt()) < 1e-12);
    }

    #[test]
    fn gas_damping_reference() {
        let env = EnvironmentSpec::air(1.0, 1e-10 * K.torr_to_pascal);
        let sphere = presets::diamond(100e-9);
        assert!(rel(mean_gas_speed(&env, &K), 29.342_929_647_525_094) < 1e-12);
        let g = gas_damping(&env, &sphere, &K);
        assert!(rel(g, 6.611_506_256_621_18e-6) < 1e-12);
        // quality factor at 1 kHz is of order 10⁹
        let q = 2.0 * PI * 1e3 / g;
        assert_eq!(q.log10().round(), 9.0, "{q:e}");
        let vacuum = EnvironmentSpec::air(1.0, 0.0);
        assert_eq!(gas_damping(&vacuum, &sphere, &K), 0.0);
    }

    #[test]
    fn detuning_and_photon_number() {
        let d = presets::reference_system().derive().unwrap();
        assert!(rel(d.detuning, 0.01 * d.kappa) < 1e-15);
        assert_eq!(d.n_ph, d.alpha * d.alpha);
        assert!(d.omega_l < d.omega_c);
        let k_sq = 4.0 * d.eps_c / (3500.0 * K.c * d.trap_waist.powi(2));
        assert!(rel((k_sq * d.intensity).sqrt(), d.omega) < 1e-12);
    }

    #[test]
    fn validation_names_field() {
        let mut spec = presets::reference_system();
        spec.sphere.permittivity = 0.5;
        match spec.derive() {
            Err(Error::InvalidSpec { field, .. }) => assert_eq!(field, "sphere.permittivity"),
            other => panic!("{other:?}"),
        }
        let mut spec = presets::reference_system();
        spec.trap.numerical_aperture = 1.0;
        assert!(spec.derive().is_err());
        let mut spec = presets::reference_system();
        spec.drive.detuning_ratio = -0.01;
        assert!(spec.derive().is_err());
        let mut spec = presets::reference_system();
        spec.csl.rate = -1.0;
        assert!(spec.derive().is_err());
    }
}
