use levcsl::experiments::{
    default_length_grid, detectable_lambda_bound, detectable_lambda_bound_with, discriminability,
    linear_grid, max_rel_diff_at, sweep_length, BoundOptions, BoundOutcome, Protocol,
};
use levcsl::{presets, Error, SystemSpec};

fn panel(g: f64, torr: f64, rate: f64) -> SystemSpec {
    presets::length_protocol(0.008, g, torr, rate)
}

fn panel_d() -> SystemSpec {
    panel(0.009, 1e-12, 1e-12)
}

fn length_protocol(spec: &SystemSpec) -> Protocol {
    Protocol::Length(default_length_grid(spec.cavity.mirror_curvature))
}

#[test]
fn discriminability_grows_with_length() {
    for spec in [panel(0.08, 1e-10, 1e-10), panel(0.025, 1e-11, 1e-11), panel_d()] {
        let r = sweep_length(&spec, &default_length_grid(spec.cavity.mirror_curvature)).unwrap();
        let d: Vec<f64> = r.points.iter().map(|p| p.rel_diff.unwrap()).collect();
        assert!(d.windows(2).all(|w| w[1] > w[0]));
        let table = discriminability(&r);
        assert_eq!(table.argmax, Some(r.points.len() - 1));
    }
}

#[test]
fn curves_part_ways_beyond_confocal() {
    // past L = R_c the CSL-free curve turns over while the CSL curve still rises
    for spec in [panel(0.08, 1e-10, 1e-10), panel(0.025, 1e-11, 1e-11), panel_d()] {
        let rc = spec.cavity.mirror_curvature;
        let r = sweep_length(&spec, &linear_grid(rc, 1.995 * rc, 80)).unwrap();
        let slope = |f: fn(&levcsl::SweepPoint) -> f64| -> Vec<f64> {
            r.points.windows(2).map(|w| f(&w[1]) - f(&w[0])).collect()
        };
        let on = slope(|p| p.y2_on.unwrap());
        let off = slope(|p| p.y2_off.unwrap());
        assert!(off[0] > 0.0, "off curve rises at the confocal point");
        let split = on.iter().zip(&off).any(|(a, b)| *a > 0.0 && *b < 0.0);
        assert!(split);
    }
}

#[test]
fn doubling_the_rate_increases_discriminability() {
    let spec = panel_d();
    let protocol = length_protocol(&spec);
    let mut last = 0.0;
    for lambda in [1e-14, 2e-14, 4e-14, 1e-13, 1e-12, 2e-12, 1e-11] {
        let d = max_rel_diff_at(&spec, &protocol, lambda).unwrap();
        assert!(d > last, "lambda {lambda}: {d} <= {last}");
        last = d;
    }
    assert_eq!(max_rel_diff_at(&spec, &protocol, 0.0).unwrap(), 0.0);
}

#[test]
fn bound_is_monotone_in_precision() {
    let spec = panel_d();
    let protocol = length_protocol(&spec);
    let mut last = 0.0;
    for precision in [1e-4, 1e-3, 0.005, 0.015, 0.05, 0.2] {
        let r = *detectable_lambda_bound(&spec, &protocol, precision)
            .unwrap()
            .found()
            .unwrap();
        assert!(r.converged && r.iterations <= 60);
        assert!(r.bracket.0 < r.lambda_star && r.lambda_star < r.bracket.1);
        assert!((r.max_rel_diff / precision - 1.0).abs() <= 0.01);
        assert!(r.lambda_star > last);
        last = r.lambda_star;
    }
}

#[test]
fn vanishing_precision_detects_vanishing_rates() {
    let spec = panel_d();
    let protocol = length_protocol(&spec);
    let coarse = detectable_lambda_bound(&spec, &protocol, 1e-3).unwrap();
    let fine = detectable_lambda_bound(&spec, &protocol, 1e-9).unwrap();
    let (c, f) = (coarse.found().unwrap(), fine.found().unwrap());
    // linear response: six decades of precision give about six of λ
    let decades = (c.lambda_star / f.lambda_star).log10();
    assert!((decades - 6.0).abs() < 0.1, "{decades}");
}

#[test]
fn no_bracket_is_reported() {
    let spec = panel_d();
    let protocol = length_protocol(&spec);
    let opts = BoundOptions {
        lambda_lo: 1e-9,
        lambda_hi: 1e-6,
        ..BoundOptions::default()
    };
    match detectable_lambda_bound_with(&spec, &protocol, 0.015, &opts).unwrap() {
        BoundOutcome::NoBracket { rel_diff_lo, .. } => assert!(rel_diff_lo > 0.015),
        other => panic!("expected no bracket, got {other:?}"),
    }
    assert!(matches!(
        detectable_lambda_bound(&spec, &protocol, 0.0),
        Err(Error::InvalidSpec { .. })
    ));
}

#[test]
fn lengths_at_or_beyond_concentric_are_rejected() {
    let spec = panel_d();
    let rc = spec.cavity.mirror_curvature;
    let err = sweep_length(&spec, &[rc, 2.0 * rc]).unwrap_err();
    assert!(matches!(err, Error::UnstableGeometry { .. }));
}
