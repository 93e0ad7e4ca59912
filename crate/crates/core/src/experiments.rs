//! The two discrimination protocols and the detectable-rate search.
//!
//! *Trap-frequency sweep*: the cavity is fixed and the trap power is tuned to
//! step ω; `G` stays at the same multiple of κ (hence fixed).
//!
//! *Cavity-length sweep*: the mirror separation is stepped between confocal
//! and concentric while ω, Δ and `G` are retuned so that `ω/κ`, `Δ/κ` and
//! `G/κ` keep their base values. The dimensionless drift `A/κ` is then the
//! same at every point and only the diffusion rates move.
//!
//! The observable is the relative excess of `⟨Y²⟩` with collapse noise over
//! the same quantity without it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::noise::{self, DiffusionBudget};
use crate::params::{derive_cavity, Coupling, SystemSpec, TrapDrive};
use crate::steady_state::{build_model, solve_lyapunov};

pub const DEFAULT_POINTS: usize = 60;
/// Default trap-frequency range, Hz (cyclic).
pub const DEFAULT_FREQUENCY_RANGE_HZ: (f64, f64) = (200.0, 20_000.0);
/// Default length range as multiples of `R_c`.
pub const DEFAULT_LENGTH_RANGE: (f64, f64) = (1.0, 1.995);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Trapping frequency, rad/s.
    Omega,
    /// Cavity length, m.
    Length,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Omega => "omega",
            SweepAxis::Length => "L",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            SweepAxis::Omega => "rad/s",
            SweepAxis::Length => "m",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    /// Fully resolved operating point.
    pub spec: SystemSpec,
    pub budget_on: DiffusionBudget,
    pub budget_off: DiffusionBudget,
    pub y2_on: Option<f64>,
    pub y2_off: Option<f64>,
    pub rel_diff: Option<f64>,
    /// Both models were Hurwitz; when false the `⟨Y²⟩` fields are empty.
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn axis_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.axis_value).collect()
    }

    pub fn stable_points(&self) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(|p| p.stable)
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// 60 log-spaced trap frequencies over 2π·[0.2, 20] kHz.
pub fn default_omega_grid() -> Vec<f64> {
    let (lo, hi) = DEFAULT_FREQUENCY_RANGE_HZ;
    let tau = std::f64::consts::TAU;
    log_grid(tau * lo, tau * hi, DEFAULT_POINTS)
}

/// 60 lengths over `[R_c, 1.995 R_c]`.
pub fn default_length_grid(mirror_curvature: f64) -> Vec<f64> {
    let (lo, hi) = DEFAULT_LENGTH_RANGE;
    linear_grid(lo * mirror_curvature, hi * mirror_curvature, DEFAULT_POINTS)
}

fn check_axis(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidSweep("axis has no points".into()));
    }
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidSweep("axis values must be finite and > 0".into()));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSweep("axis must be strictly increasing".into()));
    }
    Ok(())
}

/// Solve one operating point with CSL on and off.
pub fn evaluate_point(axis_value: f64, spec: SystemSpec) -> Result<SweepPoint> {
    let derived = spec.derive()?;
    let budget_on = noise::budget(&spec.with_csl(true), &derived)?;
    let budget_off = noise::budget(&spec.with_csl(false), &derived)?;
    let solve = |b: &DiffusionBudget| -> Result<Option<f64>> {
        match solve_lyapunov(&build_model(&derived, b)?) {
            Ok(s) => Ok(Some(s.y2)),
            Err(Error::Unstable { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let y2_on = solve(&budget_on)?;
    let y2_off = solve(&budget_off)?;
    let (y2_on, y2_off, rel_diff) = match (y2_on, y2_off) {
        (Some(on), Some(off)) => (Some(on), Some(off), Some((on - off) / off)),
        _ => (None, None, None),
    };
    Ok(SweepPoint {
        axis_value,
        spec,
        budget_on,
        budget_off,
        y2_on,
        y2_off,
        rel_diff,
        stable: rel_diff.is_some(),
    })
}

fn run(axis: SweepAxis, specs: Vec<(f64, SystemSpec)>) -> Result<SweepResult> {
    let points = specs
        .into_par_iter()
        .map(|(v, s)| evaluate_point(v, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { axis, points })
}

/// `G/κ` of the base point, whichever way the coupling was specified.
fn coupling_ratio(spec: &SystemSpec) -> Result<f64> {
    Ok(match spec.drive.coupling {
        Coupling::Ratio(r) => r,
        Coupling::InputPower(_) => {
            let d = spec.derive()?;
            d.coupling / d.kappa
        }
    })
}

/// `⟨Y²⟩` on/off versus trapping frequency at fixed cavity and fixed `G`.
pub fn sweep_omega(spec: &SystemSpec, omegas: &[f64]) -> Result<SweepResult> {
    spec.validate()?;
    check_axis(omegas)?;
    let ratio = coupling_ratio(spec)?;
    let specs = omegas
        .iter()
        .map(|&w| {
            let mut s = *spec;
            s.trap.drive = TrapDrive::Frequency(w);
            s.drive.coupling = Coupling::Ratio(ratio);
            (w, s)
        })
        .collect();
    run(SweepAxis::Omega, specs)
}

/// `⟨Y²⟩` on/off versus cavity length with `ω/κ`, `Δ/κ`, `G/κ` held at the
/// values of `spec`.
pub fn sweep_length(spec: &SystemSpec, lengths: &[f64]) -> Result<SweepResult> {
    spec.validate()?;
    check_axis(lengths)?;
    let limit = 2.0 * spec.cavity.mirror_curvature;
    if let Some(&bad) = lengths.iter().find(|&&l| l >= limit) {
        return Err(Error::UnstableGeometry { length: bad, limit });
    }
    let base = spec.derive()?;
    let omega_ratio = base.omega / base.kappa;
    let g_ratio = base.coupling / base.kappa;
    let specs = lengths
        .iter()
        .map(|&l| {
            let mut s = *spec;
            s.cavity.length = l;
            let kappa = derive_cavity(&s.cavity, &Constants::CODATA)?.kappa;
            s.trap.drive = TrapDrive::Frequency(omega_ratio * kappa);
            s.drive.coupling = Coupling::Ratio(g_ratio);
            Ok((l, s))
        })
        .collect::<Result<Vec<_>>>()?;
    run(SweepAxis::Length, specs)
}

/// One row of the sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub axis_value: f64,
    #[serde(rename = "D_t")]
    pub d_t: f64,
    #[serde(rename = "D_c")]
    pub d_c: f64,
    #[serde(rename = "D_a")]
    pub d_a: f64,
    pub lambda_sph: f64,
    #[serde(rename = "Y2_on")]
    pub y2_on: Option<f64>,
    #[serde(rename = "Y2_off")]
    pub y2_off: Option<f64>,
    pub rel_diff: Option<f64>,
    pub stable_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminability {
    /// Largest relative difference over the stable points (NaN if none).
    pub max_rel_diff: f64,
    pub argmax: Option<usize>,
    pub rows: Vec<TableRow>,
}

impl Discriminability {
    pub fn argmax_axis_value(&self) -> Option<f64> {
        self.argmax.map(|i| self.rows[i].axis_value)
    }
}

pub fn discriminability(result: &SweepResult) -> Discriminability {
    let rows: Vec<TableRow> = result
        .points
        .iter()
        .map(|p| TableRow {
            axis_value: p.axis_value,
            d_t: p.budget_on.trap_scattering,
            d_c: p.budget_on.cavity_scattering,
            d_a: p.budget_on.gas,
            lambda_sph: p.budget_on.collapse,
            y2_on: p.y2_on,
            y2_off: p.y2_off,
            rel_diff: p.rel_diff,
            stable_flag: p.stable,
        })
        .collect();
    let argmax = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.rel_diff.map(|d| (i, d)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    Discriminability {
        max_rel_diff: argmax.and_then(|i| rows[i].rel_diff).unwrap_or(f64::NAN),
        argmax,
        rows,
    }
}

/// Which sweep the bound search runs, with its axis.
#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    Omega(Vec<f64>),
    Length(Vec<f64>),
}

impl Protocol {
    pub fn run(&self, spec: &SystemSpec) -> Result<SweepResult> {
        match self {
            Protocol::Omega(grid) => sweep_omega(spec, grid),
            Protocol::Length(grid) => sweep_length(spec, grid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    /// Initial bracket on λ, s⁻¹.
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub max_iterations: usize,
    /// Stop when `max_rel_diff(λ)` is within this relative distance of the
    /// target precision.
    pub rel_tolerance: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            lambda_lo: 1e-30,
            lambda_hi: 1.0,
            max_iterations: 60,
            rel_tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub precision: f64,
    /// Smallest λ whose signature reaches `precision`.
    pub lambda_star: f64,
    /// Bracket `(λ_lo, λ_hi)` around `lambda_star` at termination.
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// Discriminability reached at `lambda_star`.
    pub max_rel_diff: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum BoundOutcome {
    Found(BoundResult),
    /// The target precision is not crossed between the initial bracket ends.
    NoBracket {
        lambda_lo: f64,
        lambda_hi: f64,
        rel_diff_lo: f64,
        rel_diff_hi: f64,
    },
}

impl BoundOutcome {
    pub fn found(&self) -> Option<&BoundResult> {
        match self {
            BoundOutcome::Found(r) => Some(r),
            BoundOutcome::NoBracket { .. } => None,
        }
    }
}

/// Maximum discriminability of `protocol` at collapse rate `lambda`.
pub fn max_rel_diff_at(spec: &SystemSpec, protocol: &Protocol, lambda: f64) -> Result<f64> {
    let mut s = *spec;
    s.csl.rate = lambda;
    Ok(discriminability(&protocol.run(&s)?).max_rel_diff)
}

pub fn detectable_lambda_bound(
    spec: &SystemSpec,
    protocol: &Protocol,
    precision: f64,
) -> Result<BoundOutcome> {
    detectable_lambda_bound_with(spec, protocol, precision, &BoundOptions::default())
}

/// Bisection in `log λ` for the rate at which the largest relative
/// difference over the sweep equals `precision`.
pub fn detectable_lambda_bound_with(
    spec: &SystemSpec,
    protocol: &Protocol,
    precision: f64,
    opts: &BoundOptions,
) -> Result<BoundOutcome> {
    if !(precision.is_finite() && precision > 0.0) {
        return Err(Error::spec("precision", format!("must be > 0, got {precision}")));
    }
    if !(opts.lambda_lo > 0.0 && opts.lambda_hi > opts.lambda_lo) {
        return Err(Error::spec("lambda bracket", "need 0 < lambda_lo < lambda_hi"));
    }
    let (mut lo, mut hi) = (opts.lambda_lo, opts.lambda_hi);
    let f_lo = max_rel_diff_at(spec, protocol, lo)?;
    let f_hi = max_rel_diff_at(spec, protocol, hi)?;
    if !(f_lo < precision && f_hi > precision) {
        return Ok(BoundOutcome::NoBracket {
            lambda_lo: lo,
            lambda_hi: hi,
            rel_diff_lo: f_lo,
            rel_diff_hi: f_hi,
        });
    }
    let mut last = (hi, f_hi);
    for it in 1..=opts.max_iterations {
        let mid = (lo * hi).sqrt();
        let f = max_rel_diff_at(spec, protocol, mid)?;
        last = (mid, f);
        if (f / precision - 1.0).abs() <= opts.rel_tolerance {
            return Ok(BoundOutcome::Found(BoundResult {
                precision,
                lambda_star: mid,
                bracket: (lo, hi),
                iterations: it,
                max_rel_diff: f,
                converged: true,
            }));
        }
        if f < precision {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BoundOutcome::Found(BoundResult {
        precision,
        lambda_star: last.0,
        bracket: (lo, hi),
        iterations: opts.max_iterations,
        max_rel_diff: last.1,
        converged: false,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn grids() {
        let g = default_omega_grid();
        assert_eq!(g.len(), 60);
        assert!((g[0] / (std::f64::consts::TAU * 200.0) - 1.0).abs() < 1e-12);
        assert!((g[59] / (std::f64::consts::TAU * 20_000.0) - 1.0).abs() < 1e-12);
        let l = default_length_grid(0.02);
        assert_eq!(l[0], 0.02);
        assert!((l[59] - 0.0399).abs() < 1e-15);
        assert!(l.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn axis_validation() {
        let spec = presets::reference_system();
        assert!(matches!(
            sweep_omega(&spec, &[2.0, 1.0]),
            Err(Error::InvalidSweep(_))
        ));
        assert!(matches!(sweep_omega(&spec, &[]), Err(Error::InvalidSweep(_))));
        let spec = presets::length_protocol(0.008, 0.08, 1e-10, 1e-10);
        assert!(matches!(
            sweep_length(&spec, &[0.02, 0.04]),
            Err(Error::UnstableGeometry { .. })
        ));
    }

    #[test]
    fn zero_rate_sweep_has_no_signature() {
        let mut spec = presets::reference_system();
        spec.csl.rate = 0.0;
        let r = sweep_omega(&spec, &log_grid(2e3, 2e5, 7)).unwrap();
        assert!(r.points.iter().all(|p| p.rel_diff == Some(0.0)));
        assert_eq!(discriminability(&r).max_rel_diff, 0.0);
    }

    #[test]
    fn unstable_points_are_marked() {
        // undamped, uncoupled mechanics is only marginally stable
        let mut spec = presets::reference_system();
        spec.environment.pressure = 0.0;
        spec.drive.coupling = Coupling::Ratio(0.0);
        let r = sweep_omega(&spec, &[1e3, 2e3]).unwrap();
        assert!(r.points.iter().all(|p| !p.stable && p.y2_on.is_none()));
        assert!(discriminability(&r).max_rel_diff.is_nan());
    }

    #[test]
    fn input_power_coupling_is_pinned_across_omega() {
        let mut spec = presets::reference_system();
        let d = spec.derive().unwrap();
        spec.drive.coupling = Coupling::InputPower(d.input_power);
        let r = sweep_omega(&spec, &log_grid(3e3, 3e4, 4)).unwrap();
        for p in &r.points {
            let dp = p.spec.derive().unwrap();
            assert!((dp.coupling / d.coupling - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn no_bracket_is_reported() {
        let spec = presets::length_protocol(0.008, 0.009, 1e-12, 1e-12);
        let proto = Protocol::Length(linear_grid(0.038, 0.0399, 5));
        let out = detectable_lambda_bound_with(
            &spec,
            &proto,
            0.015,
            &BoundOptions {
                lambda_hi: 1e-14,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(out, BoundOutcome::NoBracket { .. }));
        assert!(detectable_lambda_bound(&spec, &proto, 0.0).is_err());
    }
}
