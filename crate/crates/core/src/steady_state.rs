//! Linearized dynamics of `(x, p, X, Y)` and its stationary covariance.
//!
//! With `X = (a + a†)/√2` and `Y = −i(a − a†)/√2` the quantum Langevin
//! equations become the real linear system `u̇ = A u + noise` with
//!
//! ```text
//!     | 0     ω     0     0 |
//! A = | −ω    −γ   −√2G   0 |        D = diag(0, D_tot, κ, κ)
//!     | 0     0    −κ     Δ |
//!     | −√2G  0    −Δ    −κ |
//! ```
//!
//! and the symmetrized stationary covariance `V` solves
//! `A V + V Aᵀ + D = 0`. Vacuum quadrature variance is 1/2.

use std::f64::consts::SQRT_2;

use nalgebra::{Complex, Matrix4, SMatrix, SVector, Schur, SymmetricEigen, Vector4};

use crate::error::{Error, Result};
use crate::noise::{self, DiffusionBudget};
use crate::params::{DerivedParams, SystemSpec};

/// Required relative Lyapunov residual for an accepted solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Negative eigenvalues of `V` down to this fraction of the largest are
/// treated as rounding and clamped.
pub const PSD_TOLERANCE: f64 = 1e-10;

const MAX_REFINEMENTS: usize = 6;

pub const X: usize = 0;
pub const P: usize = 1;
pub const QX: usize = 2;
pub const QY: usize = 3;

/// Drift and (diagonal) diffusion of the linear system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel {
    pub drift: Matrix4<f64>,
    /// Diagonal of the diffusion matrix.
    pub diffusion: Vector4<f64>,
}

impl LinearModel {
    pub fn new(drift: Matrix4<f64>, diffusion: Vector4<f64>) -> Result<Self> {
        if drift.iter().any(|v| !v.is_finite()) {
            return Err(Error::spec("model.drift", "entries must be finite"));
        }
        if diffusion.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::spec(
                "model.diffusion",
                "diagonal entries must be finite and >= 0",
            ));
        }
        Ok(Self { drift, diffusion })
    }

    /// Model of the stated optomechanical form from its rates (all rad/s or s⁻¹).
    pub fn optomechanical(
        omega: f64,
        gamma: f64,
        kappa: f64,
        detuning: f64,
        coupling: f64,
        mechanical_diffusion: f64,
    ) -> Result<Self> {
        let g = SQRT_2 * coupling;
        #[rustfmt::skip]
        let drift = Matrix4::new(
            0.0,    omega,  0.0,       0.0,
            -omega, -gamma, -g,        0.0,
            0.0,    0.0,    -kappa,    detuning,
            -g,     0.0,    -detuning, -kappa,
        );
        Self::new(
            drift,
            Vector4::new(0.0, mechanical_diffusion, kappa, kappa),
        )
    }

    pub fn diffusion_matrix(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&self.diffusion)
    }

    /// Largest of the diagonal drift magnitudes and the mechanical frequency,
    /// i.e. `max(κ, ω, γ)` for a model of the optomechanical form.
    pub fn fastest_rate(&self) -> f64 {
        (0..4)
            .map(|i| self.drift[(i, i)].abs())
            .fold(self.drift[(X, P)].abs(), f64::max)
    }

    /// Same drift, diffusion replaced.
    pub fn with_diffusion(&self, diffusion: Vector4<f64>) -> Result<Self> {
        Self::new(self.drift, diffusion)
    }
}

/// Assemble the model from the parameter chain and a diffusion budget.
pub fn build_model(derived: &DerivedParams, budget: &DiffusionBudget) -> Result<LinearModel> {
    LinearModel::optomechanical(
        derived.omega,
        derived.gamma,
        derived.kappa,
        derived.detuning,
        derived.coupling,
        budget.total,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// All eigenvalues strictly in the left half plane.
    pub stable: bool,
    /// Largest real part among the eigenvalues (NaN if the eigen-solve failed).
    pub spectral_abscissa: f64,
    pub eigenvalues: Vec<Complex<f64>>,
}

pub fn check_stability(model: &LinearModel) -> StabilityReport {
    let Some(schur) = Schur::try_new(model.drift, f64::EPSILON, 100_000) else {
        return StabilityReport {
            stable: false,
            spectral_abscissa: f64::NAN,
            eigenvalues: Vec::new(),
        };
    };
    let eigenvalues: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    let spectral_abscissa = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    StabilityReport {
        stable: spectral_abscissa < 0.0,
        spectral_abscissa,
        eigenvalues,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// Symmetrized covariance of `(x, p, X, Y)`.
    pub covariance: Matrix4<f64>,
    /// `⟨Y²⟩ = V[3][3]`.
    pub y2: f64,
    /// `‖AV + VAᵀ + D‖_F / ‖D‖_F`.
    pub residual_norm: f64,
}

impl SteadyState {
    /// Eigenvalues of the covariance, ascending, with rounding-level negative
    /// values clamped to zero.
    pub fn eigenvalues(&self) -> Vector4<f64> {
        let mut ev = SymmetricEigen::new(self.covariance).eigenvalues;
        ev.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
        ev.map(|v| v.max(0.0))
    }

    pub fn rows(&self) -> [[f64; 4]; 4] {
        let v = &self.covariance;
        std::array::from_fn(|i| std::array::from_fn(|j| v[(i, j)]))
    }
}

/// Position of `V[i][j]`, `i <= j`, in the packed upper triangle.
fn packed(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // rows before i contribute 4 + 3 + ... entries
    i * 4 - i * (i.saturating_sub(1)) / 2 + (j - i)
}

const PAIRS: [(usize, usize); 10] = [
    (0, 0), (0, 1), (0, 2), (0, 3),
    (1, 1), (1, 2), (1, 3),
    (2, 2), (2, 3),
    (3, 3),
];

/// `AV + VAᵀ + Q`, each entry summed in compensated (twice-working)
/// precision.
///
/// For a weakly damped mode the terms `ωV` cancel down to `γV`, so a plain
/// f64 residual is dominated by its own rounding and cannot drive
/// refinement.
fn lyapunov_residual(a: &Matrix4<f64>, v: &Matrix4<f64>, q: &Matrix4<f64>) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| {
        let mut acc = Compensated::new(q[(i, j)]);
        for k in 0..4 {
            acc.add_product(a[(i, k)], v[(k, j)]);
            acc.add_product(v[(i, k)], a[(j, k)]);
        }
        acc.value()
    })
}

/// Dot-product accumulator with error-free transforms (TwoSum, FMA-based
/// TwoProduct).
struct Compensated {
    sum: f64,
    err: f64,
}

impl Compensated {
    fn new(x: f64) -> Self {
        Self { sum: x, err: 0.0 }
    }

    fn add_product(&mut self, x: f64, y: f64) {
        let p = x * y;
        let p_err = x.mul_add(y, -p);
        let s = self.sum + p;
        let z = s - self.sum;
        let s_err = (self.sum - (s - z)) + (p - z);
        self.sum = s;
        self.err += s_err + p_err;
    }

    fn value(&self) -> f64 {
        self.sum + self.err
    }
}

/// Solve `A V + V Aᵀ + Q = 0` for symmetric `V`, given symmetric `Q`.
///
/// The ten independent entries of `V` are the unknowns of a dense 10×10
/// system, which is equilibrated, solved by fully pivoted LU and then
/// polished by iterative refinement on the matrix residual for as long as
/// the residual keeps shrinking.
/// No stability check is made here; a non-Hurwitz `A` either gives a
/// singular system or a covariance with no physical meaning.
pub fn solve_continuous_lyapunov(
    a: &Matrix4<f64>,
    q: &Matrix4<f64>,
) -> Result<(Matrix4<f64>, f64)> {
    let mut m = SMatrix::<f64, 10, 10>::zeros();
    for (row, &(i, j)) in PAIRS.iter().enumerate() {
        for k in 0..4 {
            m[(row, packed(k, j))] += a[(i, k)];
            m[(row, packed(i, k))] += a[(j, k)];
        }
    }
    let row_scale: SVector<f64, 10> = SVector::from_fn(|r, _| {
        let s = m.row(r).amax();
        if s > 0.0 { 1.0 / s } else { 1.0 }
    });
    for r in 0..10 {
        let s = row_scale[r];
        m.row_mut(r).scale_mut(s);
    }
    let col_scale: SVector<f64, 10> = SVector::from_fn(|c, _| {
        let s = m.column(c).amax();
        if s > 0.0 { 1.0 / s } else { 1.0 }
    });
    for c in 0..10 {
        let s = col_scale[c];
        m.column_mut(c).scale_mut(s);
    }
    let lu = m.full_piv_lu();
    if !lu.is_invertible() {
        return Err(Error::Singular);
    }
    // unknowns in scaled coordinates are V_packed / col_scale
    let solve = |rhs: &Matrix4<f64>| -> Result<Matrix4<f64>> {
        let b = SVector::<f64, 10>::from_fn(|r, _| -rhs[PAIRS[r]] * row_scale[r]);
        let y = lu.solve(&b).ok_or(Error::Singular)?;
        let mut v = Matrix4::zeros();
        for (r, &(i, j)) in PAIRS.iter().enumerate() {
            let val = y[r] * col_scale[r];
            v[(i, j)] = val;
            v[(j, i)] = val;
        }
        Ok(v)
    };

    // refine until the residual stops shrinking; the last step may make it worse
    let mut v = solve(q)?;
    let mut r = lyapunov_residual(a, &v, q);
    let mut rn = r.norm();
    for _ in 0..MAX_REFINEMENTS {
        let step = solve(&((r + r.transpose()) * 0.5))?;
        let next = v + step;
        let next_r = lyapunov_residual(a, &next, q);
        let next_rn = next_r.norm();
        if !(next_rn < rn) {
            break;
        }
        (v, r, rn) = (next, next_r, next_rn);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular);
    }
    let r = rn;
    let qn = q.norm();
    let residual = if qn > 0.0 { r / qn } else { r };
    Ok((v, residual))
}

/// Stationary covariance of a stable model.
pub fn solve_lyapunov(model: &LinearModel) -> Result<SteadyState> {
    let report = check_stability(model);
    if !report.stable {
        return Err(Error::Unstable {
            abscissa: report.spectral_abscissa,
        });
    }
    let (v, residual_norm) = solve_continuous_lyapunov(&model.drift, &model.diffusion_matrix())?;
    if residual_norm > RESIDUAL_TOLERANCE {
        return Err(Error::Singular);
    }
    let ev = SymmetricEigen::new(v).eigenvalues;
    let (min, max) = ev
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if min < -PSD_TOLERANCE * max.abs() {
        return Err(Error::NotPositive { min, max });
    }
    Ok(SteadyState {
        covariance: v,
        y2: v[(QY, QY)],
        residual_norm,
    })
}

/// Every intermediate of one pass through the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub spec: SystemSpec,
    pub derived: DerivedParams,
    pub budget: DiffusionBudget,
    pub model: LinearModel,
    pub stability: StabilityReport,
    pub state: SteadyState,
}

/// Run params → budget → model → Lyapunov for `spec` as given.
pub fn evaluate(spec: &SystemSpec) -> Result<Evaluation> {
    let derived = spec.derive()?;
    let budget = noise::budget(spec, &derived)?;
    let model = build_model(&derived, &budget)?;
    let stability = check_stability(&model);
    let state = solve_lyapunov(&model)?;
    Ok(Evaluation {
        spec: *spec,
        derived,
        budget,
        model,
        stability,
        state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVariance {
    pub csl_on: Evaluation,
    pub csl_off: Evaluation,
}

impl PhaseVariance {
    pub fn y2_on(&self) -> f64 {
        self.csl_on.state.y2
    }

    pub fn y2_off(&self) -> f64 {
        self.csl_off.state.y2
    }

    /// `(⟨Y²⟩_on − ⟨Y²⟩_off) / ⟨Y²⟩_off`.
    pub fn rel_diff(&self) -> f64 {
        (self.y2_on() - self.y2_off()) / self.y2_off()
    }
}

/// `⟨Y²⟩` with and without collapse noise, regardless of `spec.csl.enabled`.
pub fn phase_variance(spec: &SystemSpec) -> Result<PhaseVariance> {
    Ok(PhaseVariance {
        csl_on: evaluate(&spec.with_csl(true))?,
        csl_off: evaluate(&spec.with_csl(false))?,
    })
}
