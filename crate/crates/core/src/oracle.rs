//! Euler–Maruyama cross-check of the Lyapunov solution.
//!
//! For a linear system driven by δ-correlated inputs, the symmetrized
//! moments of the quantum Langevin equations coincide with those of the
//! classical SDE `du = A u dt + B dW` with `B Bᵀ = D`, so a plain ensemble
//! simulation of that SDE estimates the same covariance the Lyapunov solver
//! returns, by an unrelated route.
//!
//! Each trajectory draws from its own ChaCha stream (`seed`, stream =
//! trajectory index), and the ensemble reduction runs in trajectory order,
//! so results are bit-identical for a given seed whatever the thread count.

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::steady_state::{check_stability, LinearModel};

/// `dt` may not exceed this fraction of the fastest timescale.
pub const DT_RESOLUTION: f64 = 0.05;
/// Burn-in must cover this many slowest relaxation times.
pub const BURN_IN_RELAXATIONS: f64 = 5.0;
/// Minimum number of batches used for the standard error.
pub const MIN_BATCHES: usize = 32;

/// Batches used for `n_traj` trajectories (each trajectory is split evenly).
pub fn batch_count(n_traj: usize) -> usize {
    n_traj * MIN_BATCHES.div_ceil(n_traj.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_burn: f64,
    /// Sampling window per trajectory.
    pub t_sample: f64,
    pub n_traj: usize,
    pub seed: u64,
}

impl SimConfig {
    /// Smallest config expected to reach `target_rel_stderr` on the slowest
    /// mode with a discretization bias well below it.
    ///
    /// The variance of a time-averaged second moment of a mode relaxing at
    /// rate `s` is about `2σ⁴/(sT)`; the plan uses 1.5 times the resulting
    /// total sampling time. Euler–Maruyama inflates the stationary variance of
    /// a mode with eigenvalue `λ` by a relative `|λ|² dt / (2|Re λ|)`, so `dt`
    /// is capped to keep that below a quarter of the target. Because `ẋ = ωp`
    /// exactly, the sampled `⟨xp⟩` is a boundary term with a standard error of
    /// order `V/(ωT)`, while the scheme biases it by `−ω dt V_pp/2`; a second
    /// cap keeps that bias below the standard error too.
    pub fn planned(
        model: &LinearModel,
        target_rel_stderr: f64,
        n_traj: usize,
        seed: u64,
    ) -> Result<Self> {
        let report = check_stability(model);
        if !report.stable {
            return Err(Error::Unstable {
                abscissa: report.spectral_abscissa,
            });
        }
        if !(target_rel_stderr > 0.0) || n_traj == 0 {
            return Err(Error::InvalidSimConfig(
                "target stderr must be > 0 and n_traj >= 1".into(),
            ));
        }
        let slowest = report.spectral_abscissa.abs();
        let total = 1.5 * 2.0 / (slowest * target_rel_stderr * target_rel_stderr);
        let dt_variance = report
            .eigenvalues
            .iter()
            .map(|z| 0.25 * target_rel_stderr * 2.0 * z.re.abs() / z.norm_sqr())
            .fold(f64::INFINITY, f64::min);
        let omega = model.drift[(0, 1)].abs();
        let batches = batch_count(n_traj) as f64;
        let dt_cross = if omega > 0.0 {
            0.5 * batches.sqrt() / (omega * omega * total)
        } else {
            f64::INFINITY
        };
        Ok(Self {
            dt: (DT_RESOLUTION / model.fastest_rate())
                .min(dt_variance)
                .min(dt_cross),
            t_burn: BURN_IN_RELAXATIONS / slowest,
            t_sample: total / n_traj as f64,
            n_traj,
            seed,
        })
    }

    pub fn burn_steps(&self) -> u64 {
        (self.t_burn / self.dt).ceil() as u64
    }

    pub fn sample_steps(&self) -> u64 {
        (self.t_sample / self.dt).ceil() as u64
    }

    /// Euler–Maruyama steps over the whole ensemble.
    pub fn total_steps(&self) -> f64 {
        (self.burn_steps() + self.sample_steps()) as f64 * self.n_traj as f64
    }

    fn check_basic(&self) -> Result<()> {
        let ok = self.dt.is_finite()
            && self.dt > 0.0
            && self.t_burn.is_finite()
            && self.t_burn >= 0.0
            && self.t_sample.is_finite()
            && self.t_sample > 0.0
            && self.n_traj >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSimConfig(format!(
                "need dt > 0, t_burn >= 0, t_sample > 0, n_traj >= 1; got {self:?}"
            )))
        }
    }

    /// Full check against `model`: resolution of the fastest timescale and
    /// enough burn-in for the slowest.
    pub fn validate(&self, model: &LinearModel) -> Result<()> {
        self.check_basic()?;
        let report = check_stability(model);
        if !report.stable {
            return Err(Error::Unstable {
                abscissa: report.spectral_abscissa,
            });
        }
        let dt_max = DT_RESOLUTION / model.fastest_rate();
        if self.dt > dt_max * (1.0 + 1e-12) {
            return Err(Error::InvalidSimConfig(format!(
                "dt = {:e} s exceeds {DT_RESOLUTION}/max(κ, ω, γ) = {dt_max:e} s",
                self.dt
            )));
        }
        let burn_min = BURN_IN_RELAXATIONS / report.spectral_abscissa.abs();
        if self.t_burn < burn_min * (1.0 - 1e-12) {
            return Err(Error::InvalidSimConfig(format!(
                "t_burn = {:e} s is shorter than {BURN_IN_RELAXATIONS}/|spectral abscissa| = {burn_min:e} s",
                self.t_burn
            )));
        }
        Ok(())
    }
}

/// Ensemble estimate of the stationary covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalCovariance {
    pub covariance: Matrix4<f64>,
    /// Batch-means standard error of each entry.
    pub stderr: Matrix4<f64>,
    /// Sampled time steps summed over trajectories.
    pub n_samples: u64,
}

/// Packed upper-triangle second moments.
type Moments = [f64; 10];

const PAIRS: [(usize, usize); 10] = [
    (0, 0), (0, 1), (0, 2), (0, 3),
    (1, 1), (1, 2), (1, 3),
    (2, 2), (2, 3),
    (3, 3),
];

/// How each outer step of length `dt` is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stepping {
    /// One Euler–Maruyama step driven by one normal draw per noisy entry.
    Single,
    /// One step driven by the normalized sum of two draws.
    Coarse,
    /// Two half steps, each driven by one of the two draws [`Coarse`] sums,
    /// so both runs see the same Brownian path.
    Fine,
}

/// One trajectory: burn in from the origin, then accumulate `batches`
/// equal-length batch means of `u uᵀ`, sampled once per outer step.
fn run_trajectory(
    model: &LinearModel,
    cfg: &SimConfig,
    stream: u64,
    batches: usize,
    stepping: Stepping,
) -> Vec<Moments> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let h = if stepping == Stepping::Fine { cfg.dt / 2.0 } else { cfg.dt };
    let step = Matrix4::identity() + model.drift * h;
    let noise: Vector4<f64> = model.diffusion.map(|d| (d * h).sqrt());
    let noisy: Vec<usize> = (0..4).filter(|&i| noise[i] > 0.0).collect();
    let mut u = Vector4::zeros();

    let draw = |rng: &mut ChaCha8Rng| -> Vector4<f64> {
        let mut z = Vector4::zeros();
        for &i in &noisy {
            z[i] = rng.sample(StandardNormal);
        }
        z
    };
    let mut advance = |u: &mut Vector4<f64>| match stepping {
        Stepping::Single => *u = step * *u + noise.component_mul(&draw(&mut rng)),
        Stepping::Coarse => {
            let z = (draw(&mut rng) + draw(&mut rng)) * std::f64::consts::FRAC_1_SQRT_2;
            *u = step * *u + noise.component_mul(&z);
        }
        Stepping::Fine => {
            for _ in 0..2 {
                *u = step * *u + noise.component_mul(&draw(&mut rng));
            }
        }
    };

    for _ in 0..cfg.burn_steps() {
        advance(&mut u);
    }
    let total = cfg.sample_steps().max(batches as u64);
    let per_batch = total / batches as u64;
    (0..batches)
        .map(|_| {
            let mut acc = [0.0; 10];
            for _ in 0..per_batch {
                advance(&mut u);
                for (a, &(i, j)) in acc.iter_mut().zip(PAIRS.iter()) {
                    *a += u[i] * u[j];
                }
            }
            acc.map(|a| a / per_batch as f64)
        })
        .collect()
}

fn simulate_unchecked(
    model: &LinearModel,
    cfg: &SimConfig,
    stepping: Stepping,
) -> EmpiricalCovariance {
    let batches_per_traj = MIN_BATCHES.div_ceil(cfg.n_traj).max(1);
    let per_traj: Vec<Vec<Moments>> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|t| run_trajectory(model, cfg, t as u64, batches_per_traj, stepping))
        .collect();
    let batches: Vec<&Moments> = per_traj.iter().flatten().collect();
    let n = batches.len() as f64;

    let mut mean = [0.0; 10];
    for b in &batches {
        for (m, v) in mean.iter_mut().zip(b.iter()) {
            *m += v;
        }
    }
    let mean = mean.map(|m| m / n);
    let mut var = [0.0; 10];
    for b in &batches {
        for ((s, v), m) in var.iter_mut().zip(b.iter()).zip(mean.iter()) {
            *s += (v - m) * (v - m);
        }
    }
    let stderr = var.map(|s| if n > 1.0 { (s / (n - 1.0) / n).sqrt() } else { f64::INFINITY });

    let mut cov = Matrix4::zeros();
    let mut se = Matrix4::zeros();
    for (r, &(i, j)) in PAIRS.iter().enumerate() {
        cov[(i, j)] = mean[r];
        cov[(j, i)] = mean[r];
        se[(i, j)] = stderr[r];
        se[(j, i)] = stderr[r];
    }
    let per_batch = cfg.sample_steps().max(batches_per_traj as u64) / batches_per_traj as u64;
    EmpiricalCovariance {
        covariance: cov,
        stderr: se,
        n_samples: per_batch * batches.len() as u64,
    }
}

/// Ensemble Euler–Maruyama estimate of the stationary covariance.
pub fn simulate(model: &LinearModel, cfg: &SimConfig) -> Result<EmpiricalCovariance> {
    cfg.validate(model)?;
    Ok(simulate_unchecked(model, cfg, Stepping::Single))
}

/// Result of rerunning a simulation at half the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub coarse: EmpiricalCovariance,
    pub fine: EmpiricalCovariance,
    /// `fine − coarse`, entrywise.
    pub shift: Matrix4<f64>,
    /// Largest `|shift| / stderr(coarse)` over the entries.
    pub max_shift_in_stderr: f64,
    /// Set when the shift exceeds three standard errors.
    pub flagged: bool,
}

/// Discretization-bias check: simulate at `dt` and `dt/2` with the same
/// seed and windows.
///
/// The two runs share their Brownian path (each coarse increment is the sum
/// of two fine ones) and are sampled at the same instants, so the shift
/// measures discretization bias rather than sampling noise.
///
/// Unlike [`simulate`] this accepts a `dt` coarser than the resolution
/// bound, so that an under-resolved step can be diagnosed; it still requires
/// the Euler map itself to be contracting.
pub fn convergence_report(model: &LinearModel, cfg: &SimConfig) -> Result<ConvergenceReport> {
    cfg.check_basic()?;
    let report = check_stability(model);
    if !report.stable {
        return Err(Error::Unstable {
            abscissa: report.spectral_abscissa,
        });
    }
    let contracting = report
        .eigenvalues
        .iter()
        .all(|z| ((1.0 + z.re * cfg.dt).powi(2) + (z.im * cfg.dt).powi(2)) < 1.0);
    if !contracting {
        return Err(Error::InvalidSimConfig(format!(
            "dt = {:e} s makes the Euler–Maruyama map non-contracting",
            cfg.dt
        )));
    }
    let coarse = simulate_unchecked(model, cfg, Stepping::Coarse);
    let fine = simulate_unchecked(model, cfg, Stepping::Fine);
    let shift = fine.covariance - coarse.covariance;
    let max_shift_in_stderr = shift
        .iter()
        .zip(coarse.stderr.iter())
        .map(|(d, s)| {
            if *s > 0.0 {
                d.abs() / s
            } else if *d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok(ConvergenceReport {
        coarse,
        fine,
        shift,
        max_shift_in_stderr,
        flagged: max_shift_in_stderr > 3.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady_state::solve_lyapunov;

    fn toy() -> LinearModel {
        LinearModel::optomechanical(0.8, 0.4, 1.0, 0.5, 0.15, 0.3).unwrap()
    }

    #[test]
    fn noiseless_decay_is_exactly_zero() {
        let m = toy().with_diffusion(Vector4::zeros()).unwrap();
        let cfg = SimConfig::planned(&m, 0.5, 2, 1).unwrap();
        let e = simulate(&m, &cfg).unwrap();
        assert_eq!(e.covariance, Matrix4::zeros());
    }

    #[test]
    fn rejects_coarse_step_and_short_burn_in() {
        let m = toy();
        let good = SimConfig::planned(&m, 0.1, 2, 1).unwrap();
        assert!(good.validate(&m).is_ok());
        let coarse = SimConfig {
            dt: 2.0 * DT_RESOLUTION / m.fastest_rate(),
            ..good
        };
        assert!(matches!(simulate(&m, &coarse), Err(Error::InvalidSimConfig(_))));
        let short = SimConfig { t_burn: good.t_burn / 2.0, ..good };
        assert!(matches!(simulate(&m, &short), Err(Error::InvalidSimConfig(_))));
        let unstable = LinearModel::optomechanical(0.8, 0.0, 1.0, 0.5, 0.0, 0.3).unwrap();
        assert!(matches!(simulate(&unstable, &good), Err(Error::Unstable { .. })));
    }

    #[test]
    fn vacuum_block() {
        let m = LinearModel::optomechanical(0.8, 0.1, 1.0, 0.5, 0.0, 0.3).unwrap();
        let cfg = SimConfig {
            t_sample: 400.0,
            ..SimConfig::planned(&m, 0.1, 8, 3).unwrap()
        };
        let e = simulate(&m, &cfg).unwrap();
        for i in 2..4 {
            let z = (e.covariance[(i, i)] - 0.5).abs() / e.stderr[(i, i)];
            assert!(z < 3.0, "entry {i}: z = {z}");
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let m = toy();
        let cfg = SimConfig {
            t_sample: 50.0,
            ..SimConfig::planned(&m, 0.1, 3, 42).unwrap()
        };
        let a = simulate(&m, &cfg).unwrap();
        let b = simulate(&m, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, &SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.covariance, c.covariance);
    }

    #[test]
    fn agrees_with_lyapunov() {
        let m = toy();
        let exact = solve_lyapunov(&m).unwrap().covariance;
        let cfg = SimConfig::planned(&m, 0.02, 16, 7).unwrap();
        let e = simulate(&m, &cfg).unwrap();
        let y = e.covariance[(3, 3)];
        assert!(e.stderr[(3, 3)] / y <= 0.02);
        for i in 0..4 {
            let z = (e.covariance[(i, i)] - exact[(i, i)]).abs() / e.stderr[(i, i)];
            assert!(z <= 3.0, "entry {i}: z = {z}");
        }
    }

    #[test]
    fn coarse_step_is_flagged() {
        let m = LinearModel::optomechanical(0.02, 0.01, 1.0, 0.01, 0.0, 0.0).unwrap();
        let cfg = SimConfig {
            dt: 0.5,
            t_burn: 20.0,
            t_sample: 2_000.0,
            n_traj: 8,
            seed: 5,
        };
        let r = convergence_report(&m, &cfg).unwrap();
        assert!(r.flagged, "{}", r.max_shift_in_stderr);
    }

    #[test]
    fn fine_step_is_not_flagged() {
        let m = toy();
        let cfg = SimConfig::planned(&m, 0.05, 8, 11).unwrap();
        let r = convergence_report(&m, &cfg).unwrap();
        assert!(!r.flagged, "{}", r.max_shift_in_stderr);
    }
}
