//! Property tests over the parameter chain, the diffusion rates and the
//! Lyapunov solution.

use levcsl::constants::Constants;
use levcsl::noise::{csl_diffusion, trap_scatter_diffusion};
use levcsl::params::{derive_cavity, derive_trap, Coupling, TrapDrive};
use levcsl::presets;
use levcsl::steady_state::{check_stability, solve_lyapunov, LinearModel, QY};
use nalgebra::Vector4;
use proptest::prelude::*;

const K: Constants = Constants::CODATA;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.log10()..hi.log10()).prop_map(|e| 10f64.powf(e))
}

/// Stable models of the optomechanical form, rates in units of κ = 1.
fn stable_model() -> impl Strategy<Value = LinearModel> {
    (
        log_uniform(1e-3, 3.0),
        log_uniform(1e-4, 1e-1),
        log_uniform(1e-2, 2.0),
        0.0..0.3f64,
        log_uniform(1e-2, 1e3),
    )
        .prop_map(|(omega, gamma, detuning, g, d)| {
            LinearModel::optomechanical(omega, gamma, 1.0, detuning, g, d).unwrap()
        })
        // near the stability edge V grows like 1/|abscissa| and the f64 floor
        // of the residual, ‖A‖‖V‖ε, crosses the acceptance bound
        .prop_filter("Hurwitz with margin", |m| check_stability(m).spectral_abscissa < -1e-4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn trap_frequency_goes_as_root_power(p in log_uniform(1e-9, 1.0), radius in log_uniform(10e-9, 1e-6)) {
        let sphere = presets::diamond(radius);
        let mut trap = presets::trap(1.0, presets::WAVELENGTH);
        trap.drive = TrapDrive::Power(p);
        let w1 = derive_trap(&trap, &sphere, &K).unwrap().omega;
        trap.drive = TrapDrive::Power(4.0 * p);
        let w4 = derive_trap(&trap, &sphere, &K).unwrap().omega;
        prop_assert!(rel(w4, 2.0 * w1) < 1e-12);
    }

    #[test]
    fn linewidth_times_length_is_constant(l in log_uniform(1e-3, 0.039)) {
        let k1 = derive_cavity(&presets::cavity(l, 0.02), &K).unwrap().kappa;
        let k0 = derive_cavity(&presets::cavity(0.01, 0.02), &K).unwrap().kappa;
        prop_assert!(rel(k1 * l, k0 * 0.01) < 1e-12);
    }

    #[test]
    fn trap_round_trip(omega in log_uniform(1e2, 1e7), radius in log_uniform(10e-9, 1e-6)) {
        let sphere = presets::diamond(radius);
        let trap = presets::trap(omega, presets::WAVELENGTH);
        let power = derive_trap(&trap, &sphere, &K).unwrap().power;
        let back = TrapDrive::Power(power);
        let w = derive_trap(&levcsl::TrapSpec { drive: back, ..trap }, &sphere, &K).unwrap().omega;
        prop_assert!(rel(w, omega) < 1e-12);
    }

    #[test]
    fn coupling_round_trip(ratio in log_uniform(1e-4, 0.5), detuning in log_uniform(1e-3, 2.0)) {
        let mut spec = presets::reference_system();
        spec.drive.coupling = Coupling::Ratio(ratio);
        spec.drive.detuning_ratio = detuning;
        let d = spec.derive().unwrap();
        spec.drive.coupling = Coupling::InputPower(d.input_power);
        let back = spec.derive().unwrap();
        prop_assert!(rel(back.coupling, d.coupling) < 1e-12);
        prop_assert!(rel(back.coupling / back.kappa, ratio) < 1e-12);
    }

    #[test]
    fn eps_c_stays_in_open_interval(eps in 1.0 + 1e-9..1e6f64) {
        let e = levcsl::NanosphereSpec { radius: 1e-7, density: 1.0, permittivity: eps }.eps_c();
        prop_assert!(e > 0.0 && e < 3.0);
    }

    #[test]
    fn collapse_and_trap_rates_scale_with_frequency(
        w1 in log_uniform(2e2, 2e5),
        factor in log_uniform(1.01, 100.0),
        radius in log_uniform(10e-9, 1e-6),
    ) {
        let mut spec = presets::reference_system();
        spec.sphere = presets::diamond(radius);
        let eval = |w: f64| {
            let mut s = spec;
            s.trap.drive = TrapDrive::Frequency(w);
            let d = s.derive().unwrap();
            (
                csl_diffusion(&s.sphere, &s.csl, d.omega, &K).unwrap(),
                trap_scatter_diffusion(&s.sphere, &d, &K),
            )
        };
        let w2 = w1 * factor;
        let (l1, t1) = eval(w1);
        let (l2, t2) = eval(w2);
        prop_assert!(rel(l1 * w1, l2 * w2) < 1e-12);
        prop_assert!(rel(t1 / w1, t2 / w2) < 1e-12);
    }

    #[test]
    fn covariance_is_linear_in_diffusion(
        m in stable_model(),
        d1 in log_uniform(1e-2, 1e3),
        d2 in log_uniform(1e-2, 1e3),
    ) {
        let with = |d: Vector4<f64>| solve_lyapunov(&m.with_diffusion(d).unwrap()).unwrap().covariance;
        let v1 = with(Vector4::new(0.0, d1, 1.0, 1.0));
        let v2 = with(Vector4::new(0.0, d2, 0.0, 0.0));
        let v12 = with(Vector4::new(0.0, d1 + d2, 1.0, 1.0));
        let err = (v12 - v1 - v2).amax() / v12.amax();
        prop_assert!(err < 1e-10, "{err:e}");
    }

    #[test]
    fn phase_variance_increases_with_diffusion(m in stable_model(), extra in log_uniform(1e-3, 10.0)) {
        let d = m.diffusion[1];
        let y = |dd: f64| {
            solve_lyapunov(&m.with_diffusion(Vector4::new(0.0, dd, 1.0, 1.0)).unwrap())
                .unwrap()
                .y2
        };
        let g = m.drift[(QY, 0)];
        let (lo, hi) = (y(d), y(d * (1.0 + extra)));
        if g != 0.0 {
            prop_assert!(hi > lo);
        } else {
            prop_assert!((hi - lo).abs() < 1e-12);
        }
    }

    #[test]
    fn uncoupled_phase_quadrature_is_vacuum(
        omega in log_uniform(1e-3, 3.0),
        gamma in log_uniform(1e-4, 1e-1),
        detuning in log_uniform(1e-2, 2.0),
        d in 0.0..1e3f64,
    ) {
        let m = LinearModel::optomechanical(omega, gamma, 1.0, detuning, 0.0, d).unwrap();
        let s = solve_lyapunov(&m).unwrap();
        prop_assert!((s.y2 - 0.5).abs() < 1e-10);
    }

    #[test]
    fn accepted_solves_meet_the_residual_bound(m in stable_model()) {
        let s = solve_lyapunov(&m).unwrap();
        prop_assert!(s.residual_norm <= 1e-10);
        let v = s.covariance;
        prop_assert!((v - v.transpose()).amax() <= 1e-12 * v.amax());
    }
}

/// Without mechanical diffusion the coupled, detuned system can squeeze the
/// phase quadrature slightly below its vacuum value.
#[test]
fn coupling_alone_can_squeeze_the_phase_quadrature() {
    let m = LinearModel::optomechanical(2.0, 0.1, 1.0, 1.0, 0.3, 0.0).unwrap();
    let y2 = solve_lyapunov(&m).unwrap().y2;
    // scipy.linalg.solve_continuous_lyapunov on the same matrices
    assert!(rel(y2, 0.487_454_701_573_553_5) < 1e-10, "{y2}");
}
