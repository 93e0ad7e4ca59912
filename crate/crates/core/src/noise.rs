//! Momentum-diffusion rates acting on the centre of mass.
//!
//! All four rates are coefficients of white-noise forces on the dimensionless
//! momentum `p`, `⟨F(t)F(t')⟩ = D δ(t − t')`, in s⁻¹.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::params::{CslSpec, DerivedParams, EnvironmentSpec, NanosphereSpec, SystemSpec};

/// Below this value of `u = R²/r_c²` the CSL form factor is evaluated from
/// its Taylor series; the closed form cancels catastrophically there.
pub const SERIES_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionBudget {
    /// `D_t`: scattering of trap light.
    pub trap_scattering: f64,
    /// `D_c`: scattering of cavity light.
    pub cavity_scattering: f64,
    /// `D_a`: gas collisions.
    pub gas: f64,
    /// `λ_sph`: CSL collapse noise (zero when CSL is disabled).
    pub collapse: f64,
    pub csl_enabled: bool,
    /// Sum of the included components.
    pub total: f64,
}

impl DiffusionBudget {
    pub fn new(trap: f64, cavity: f64, gas: f64, collapse: f64, csl_enabled: bool) -> Self {
        let collapse = if csl_enabled { collapse } else { 0.0 };
        Self {
            trap_scattering: trap,
            cavity_scattering: cavity,
            gas,
            collapse,
            csl_enabled,
            total: trap + cavity + gas + collapse,
        }
    }

    /// Light-scattering part `D = D_t + D_c`.
    pub fn light(&self) -> f64 {
        self.trap_scattering + self.cavity_scattering
    }
}

/// Bracketed form factor `e^{−u} − 1 + (u/2)(e^{−u} + 1)` with `u = R²/r_c²`.
///
/// Behaves as `u³/12` for small `u`.
pub fn csl_form_factor(u: f64) -> f64 {
    if u < SERIES_THRESHOLD {
        // general term (−1)^k (2 − k) u^k / (2 k!), k ≥ 3
        let mut sum = 0.0;
        let mut pow_over_fact = u * u / 2.0; // u^k / k! at k = 2
        for k in 3..=9 {
            pow_over_fact *= u / k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (2.0 - k as f64) * pow_over_fact / 2.0;
        }
        sum
    } else {
        let m = (-u).exp_m1();
        m * (1.0 + 0.5 * u) + u
    }
}

/// CSL momentum diffusion `λ_sph` of a homogeneous sphere trapped at `omega`.
pub fn csl_diffusion(
    sphere: &NanosphereSpec,
    csl: &CslSpec,
    omega: f64,
    k: &Constants,
) -> Result<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::spec("omega", format!("must be > 0, got {omega}")));
    }
    if !csl.enabled {
        return Ok(0.0);
    }
    let r = sphere.radius;
    let rc = csl.correlation_length;
    let u = (r / rc).powi(2);
    Ok(k.hbar / omega * 8.0 * PI * csl.rate * sphere.density / (k.amu * k.amu)
        * csl_form_factor(u)
        * rc.powi(4)
        / r.powi(3))
}

/// Common prefactor `ε_c² k_c⁶ R³ / (9 ρ₀ ω)` of both scattering rates.
fn scattering_prefactor(sphere: &NanosphereSpec, derived: &DerivedParams, k: &Constants) -> f64 {
    let k_c = derived.omega_c / k.c;
    derived.eps_c.powi(2) * k_c.powi(6) * sphere.radius.powi(3)
        / (9.0 * sphere.density * derived.omega)
}

/// `D_t = 8 ε_c² k_c⁶ R³ I / (9 ρ₀ ω ω_Lt)`.
pub fn trap_scatter_diffusion(
    sphere: &NanosphereSpec,
    derived: &DerivedParams,
    k: &Constants,
) -> f64 {
    8.0 * scattering_prefactor(sphere, derived, k) * derived.intensity / derived.omega_lt
}

/// `D_c = 2 ε_c² k_c⁶ R³ ħ n_ph c / (9 ρ₀ ω V_c)`.
pub fn cavity_scatter_diffusion(
    sphere: &NanosphereSpec,
    derived: &DerivedParams,
    k: &Constants,
) -> f64 {
    2.0 * scattering_prefactor(sphere, derived, k) * k.hbar * derived.n_ph * k.c
        / derived.mode_volume
}

/// `D_a = 2 γ k_B T / (ħ ω)`.
pub fn gas_diffusion(env: &EnvironmentSpec, gamma: f64, omega: f64, k: &Constants) -> f64 {
    2.0 * gamma * k.k_b * env.temperature / (k.hbar * omega)
}

pub fn budget(spec: &SystemSpec, derived: &DerivedParams) -> Result<DiffusionBudget> {
    budget_with(spec, derived, &Constants::CODATA)
}

pub fn budget_with(
    spec: &SystemSpec,
    derived: &DerivedParams,
    k: &Constants,
) -> Result<DiffusionBudget> {
    let collapse = csl_diffusion(&spec.sphere, &spec.csl, derived.omega, k)?;
    Ok(DiffusionBudget::new(
        trap_scatter_diffusion(&spec.sphere, derived, k),
        cavity_scatter_diffusion(&spec.sphere, derived, k),
        gas_diffusion(&spec.environment, derived.gamma, derived.omega, k),
        collapse,
        spec.csl.enabled,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Coupling, TrapDrive};
    use crate::presets;

    const K: Constants = Constants::CODATA;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn form_factor_at_unit_ratio() {
        let e = (-1f64).exp();
        let closed = e - 1.0 + 0.5 * (e + 1.0);
        assert!(rel(csl_form_factor(1.0), closed) < 1e-14);
        assert!(rel(csl_form_factor(1.0), 0.051_819_161_757_163_48) < 1e-14);
    }

    #[test]
    fn form_factor_small_argument() {
        // 30-digit reference values; the closed form keeps ~11 digits at
        // u = 1e-2 and ~9 at the switch point
        let cases = [
            (1e-2, 8.291_791_389_384_178e-8, 1e-10),
            (1e-3, 8.329_167_916_388_938e-11, 1e-8),
            (1e-4, 8.332_916_679_166_389e-14, 1e-12),
        ];
        for (u, exact, tol) in cases {
            assert!(rel(csl_form_factor(u), exact) < tol, "u = {u}");
            assert!(rel(u * u * u / 12.0, exact) < 1e-2);
        }
        // the series just below the switch is accurate to full precision
        let below = csl_form_factor(SERIES_THRESHOLD * (1.0 - 1e-15));
        assert!(rel(below, 8.329_167_916_388_938e-11) < 1e-12);
        let above = csl_form_factor(SERIES_THRESHOLD);
        assert!(rel(below, above) < 1e-8);
        assert!(csl_form_factor(1e-9) > 0.0);
    }

    #[test]
    fn collapse_reference_value() {
        let spec = presets::reference_system();
        let d = spec.derive().unwrap();
        let l = csl_diffusion(&spec.sphere, &spec.csl, d.omega, &K).unwrap();
        assert!(rel(l, 27_745.744_645_368_57) < 1e-11, "{l}");
        let off = spec.with_csl(false);
        assert_eq!(csl_diffusion(&off.sphere, &off.csl, d.omega, &K).unwrap(), 0.0);
        let mut zero = spec;
        zero.csl.rate = 0.0;
        assert_eq!(csl_diffusion(&zero.sphere, &zero.csl, d.omega, &K).unwrap(), 0.0);
        assert!(csl_diffusion(&spec.sphere, &spec.csl, 0.0, &K).is_err());
    }

    #[test]
    fn trap_scattering_reference_value() {
        let spec = presets::reference_system();
        let d = spec.derive().unwrap();
        let dt = trap_scatter_diffusion(&spec.sphere, &d, &K);
        assert!(rel(dt, 5_879.035_092_259_491) < 1e-11, "{dt}");
        let mut dark = d;
        dark.intensity = 0.0;
        assert_eq!(trap_scatter_diffusion(&spec.sphere, &dark, &K), 0.0);
    }

    #[test]
    fn trap_scattering_linear_in_frequency() {
        let spec = presets::reference_system();
        let d1 = spec.derive().unwrap();
        let mut s2 = spec;
        s2.trap.drive = TrapDrive::Power(4.0 * d1.trap_power);
        let d2 = s2.derive().unwrap();
        assert!(rel(d2.omega, 2.0 * d1.omega) < 1e-12);
        let ratio = trap_scatter_diffusion(&s2.sphere, &d2, &K)
            / trap_scatter_diffusion(&spec.sphere, &d1, &K);
        assert!(rel(ratio, 2.0) < 1e-12);
    }

    #[test]
    fn cavity_to_trap_ratio() {
        let spec = presets::reference_system();
        let d = spec.derive().unwrap();
        let ratio = cavity_scatter_diffusion(&spec.sphere, &d, &K)
            / trap_scatter_diffusion(&spec.sphere, &d, &K);
        let expected = 0.25 * K.hbar * d.n_ph * K.c / d.mode_volume * d.omega_lt / d.intensity;
        assert!(rel(ratio, expected) < 1e-12);

        let mut undriven = spec;
        undriven.drive.coupling = Coupling::Ratio(0.0);
        let d0 = undriven.derive().unwrap();
        assert_eq!(cavity_scatter_diffusion(&spec.sphere, &d0, &K), 0.0);
    }

    #[test]
    fn gas_diffusion_identity() {
        let spec = presets::reference_system();
        let d = spec.derive().unwrap();
        let da = gas_diffusion(&spec.environment, d.gamma, d.omega, &K);
        assert!(rel(da, 275.522_875_570_243_7) < 1e-11, "{da}");
        let lhs = da * d.omega / (d.gamma * spec.environment.temperature);
        assert!(rel(lhs, 2.0 * K.k_b / K.hbar) < 1e-14);
        assert_eq!(gas_diffusion(&spec.environment, 0.0, d.omega, &K), 0.0);
    }

    #[test]
    fn budget_totals() {
        let spec = presets::reference_system();
        let d = spec.derive().unwrap();
        let on = budget(&spec, &d).unwrap();
        assert_eq!(
            on.total,
            on.trap_scattering + on.cavity_scattering + on.gas + on.collapse
        );
        let off = budget(&spec.with_csl(false), &d).unwrap();
        assert_eq!(off.collapse, 0.0);
        assert_eq!(off.total, off.trap_scattering + off.cavity_scattering + off.gas);
        // cavity light and gas are small next to trap light and collapse here
        assert!(on.cavity_scattering < 0.01 * on.trap_scattering);
        assert!(on.gas < 0.1 * on.trap_scattering);
        assert!(on.gas < 0.02 * on.collapse);
    }
}
