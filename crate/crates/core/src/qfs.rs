//! The 9-dimensional quantum feature space (QFS).
//!
//! Each noise operator is parameterised as `Õ = [[γ, α − iβ], [α + iβ, −γ]]`
//! and each evolved state as `U ρ U† = [[a, b − ic], [b + ic, 1 − a]]`, so
//! that `E{O}_ρ = 2bα + 2cβ + (2a − 1)γ`. Six Pauli eigenstates give an
//! over-determined 6×3 linear system per observable, solved by least squares.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matcore::{ComplexMat2, QrFactor, RealMatrix, DEFAULT_TOL};
use crate::qsim::{validate_density_matrix, EvolutionResult, Observable, PauliState};
use crate::{Error, Result};

/// `(α, β, γ)` of one noise operator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OtildeParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl OtildeParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    /// Hermitian, traceless by construction.
    pub fn to_matrix(self) -> ComplexMat2 {
        ComplexMat2::new(
            Complex64::new(self.gamma, 0.0),
            Complex64::new(self.alpha, -self.beta),
            Complex64::new(self.alpha, self.beta),
            Complex64::new(-self.gamma, 0.0),
        )
    }
}

/// Reads `(α, β, γ)` off a Hermitian, traceless operator.
pub fn params_from_otilde(o_tilde: &ComplexMat2) -> Result<OtildeParams> {
    if !o_tilde.is_finite() {
        return Err(Error::InvalidOperator("non-finite entries".into()));
    }
    let herm = o_tilde.hermiticity_defect();
    if herm > DEFAULT_TOL {
        return Err(Error::InvalidOperator(format!("not Hermitian (defect {herm:.3e})")));
    }
    let tr = o_tilde.trace().norm();
    if tr > DEFAULT_TOL {
        return Err(Error::InvalidOperator(format!("trace {tr:.3e} is not zero")));
    }
    let lower = o_tilde.get(1, 0);
    Ok(OtildeParams {
        alpha: lower.re,
        beta: lower.im,
        gamma: o_tilde.get(0, 0).re,
    })
}

/// `(a, b, c)` of an evolved density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolvedStateParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl EvolvedStateParams {
    pub fn to_matrix(self) -> ComplexMat2 {
        ComplexMat2::new(
            Complex64::new(self.a, 0.0),
            Complex64::new(self.b, -self.c),
            Complex64::new(self.b, self.c),
            Complex64::new(1.0 - self.a, 0.0),
        )
    }

    /// `b² + c² ≤ a(1 − a)`, within `1e−12`.
    pub fn is_positive(self) -> bool {
        self.b * self.b + self.c * self.c <= self.a * (1.0 - self.a) + 1e-12
    }

    /// `[2b, 2c, 2a − 1]`, one row of the design matrix.
    pub fn design_row(self) -> [f64; 3] {
        [2.0 * self.b, 2.0 * self.c, 2.0 * self.a - 1.0]
    }
}

fn check_unitary(u: &ComplexMat2) -> Result<()> {
    let defect = u.unitarity_defect();
    if !(defect <= DEFAULT_TOL) {
        return Err(Error::InvalidParameter(format!(
            "control propagator is not unitary (defect {defect:.3e})"
        )));
    }
    Ok(())
}

pub fn state_params(u_ctrl_t: &ComplexMat2, rho: &ComplexMat2) -> Result<EvolvedStateParams> {
    validate_density_matrix(rho)?;
    check_unitary(u_ctrl_t)?;
    let evolved = rho.conjugate_by(u_ctrl_t);
    let lower = evolved.get(1, 0);
    Ok(EvolvedStateParams {
        a: evolved.get(0, 0).re,
        b: lower.re,
        c: lower.im,
    })
}

/// Evolved parameters for the six Pauli eigenstates, in canonical order.
pub fn evolved_states(u_ctrl_t: &ComplexMat2) -> Result<[EvolvedStateParams; 6]> {
    check_unitary(u_ctrl_t)?;
    let mut out = [EvolvedStateParams { a: 0.0, b: 0.0, c: 0.0 }; 6];
    for (slot, s) in out.iter_mut().zip(PauliState::ALL) {
        *slot = state_params(u_ctrl_t, &s.density_matrix())?;
    }
    Ok(out)
}

pub fn scalar_expectation(s: &EvolvedStateParams, p: &OtildeParams) -> f64 {
    2.0 * s.b * p.alpha + 2.0 * s.c * p.beta + (2.0 * s.a - 1.0) * p.gamma
}

/// Row `i` is `[2b_i, 2c_i, 2a_i − 1]` for the states in canonical order.
pub fn build_design_matrix(states: &[EvolvedStateParams; 6]) -> RealMatrix {
    let rows: Vec<[f64; 3]> = states.iter().map(|s| s.design_row()).collect();
    RealMatrix::from_rows(&rows).expect("rows have equal length")
}

/// Expectations `E{O}_ρ` indexed `[state][observable]`, canonical orders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationSet {
    pub values: [[f64; 3]; 6],
}

impl ExpectationSet {
    pub fn get(&self, state: PauliState, observable: Observable) -> f64 {
        self.values[state as usize][observable.index()]
    }

    pub fn column(&self, observable: Observable) -> [f64; 6] {
        self.values.map(|row| row[observable.index()])
    }

    /// Exact expectations implied by a control propagator and noise operators.
    pub fn from_operators(u_ctrl_t: &ComplexMat2, o_tilde: &[ComplexMat2; 3]) -> Result<Self> {
        let params = [
            params_from_otilde(&o_tilde[0])?,
            params_from_otilde(&o_tilde[1])?,
            params_from_otilde(&o_tilde[2])?,
        ];
        Self::from_params(u_ctrl_t, &params)
    }

    /// Expectations via the scalar formula.
    pub fn from_params(u_ctrl_t: &ComplexMat2, params: &[OtildeParams; 3]) -> Result<Self> {
        let states = evolved_states(u_ctrl_t)?;
        let mut values = [[0.0; 3]; 6];
        for (row, s) in values.iter_mut().zip(&states) {
            for (v, p) in row.iter_mut().zip(params) {
                *v = scalar_expectation(s, p);
            }
        }
        Ok(Self { values })
    }
}

/// Column names of the nine coordinates, in storage order.
pub const QFS_COLUMNS: [&str; 9] = [
    "alpha_x", "beta_x", "gamma_x", "alpha_y", "beta_y", "gamma_y", "alpha_z", "beta_z", "gamma_z",
];

/// One point of the feature space: `(α, β, γ)` for X, then Y, then Z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfsPoint {
    pub coords: [f64; 9],
    #[serde(default)]
    pub noise_label: String,
    #[serde(default)]
    pub pulse_label: String,
    #[serde(default)]
    pub seed: u64,
}

impl QfsPoint {
    pub fn new(coords: [f64; 9]) -> Self {
        Self {
            coords,
            noise_label: String::new(),
            pulse_label: String::new(),
            seed: 0,
        }
    }

    /// The point of a noiseless channel, `Õ = O`.
    pub fn noiseless() -> Self {
        Self::new([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
    }

    pub fn from_params(params: &[OtildeParams; 3]) -> Self {
        let mut coords = [0.0; 9];
        for (chunk, p) in coords.chunks_exact_mut(3).zip(params) {
            chunk.copy_from_slice(&p.to_array());
        }
        Self::new(coords)
    }

    pub fn with_labels(mut self, noise: impl Into<String>, pulse: impl Into<String>, seed: u64) -> Self {
        self.noise_label = noise.into();
        self.pulse_label = pulse.into();
        self.seed = seed;
        self
    }

    pub fn observable(&self, o: Observable) -> [f64; 3] {
        let i = 3 * o.index();
        [self.coords[i], self.coords[i + 1], self.coords[i + 2]]
    }

    pub fn params(&self, o: Observable) -> OtildeParams {
        let [alpha, beta, gamma] = self.observable(o);
        OtildeParams { alpha, beta, gamma }
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Coordinates clamped to `[−1, 1]`, for reporting only.
    pub fn clamped(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.coords {
            *c = c.clamp(-1.0, 1.0);
        }
        out
    }
}

/// A solved point together with the largest per-observable residual norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub point: QfsPoint,
    pub residual: f64,
}

pub fn extract_qfs_with_residual(expectations: &ExpectationSet, u_ctrl_t: &ComplexMat2) -> Result<Extraction> {
    let states = evolved_states(u_ctrl_t)?;
    let design = build_design_matrix(&states);
    let qr = QrFactor::new(&design)?;
    let mut coords = [0.0; 9];
    let mut residual = 0.0f64;
    for o in Observable::ALL {
        let rhs = expectations.column(o);
        let x = qr.solve(&rhs)?;
        residual = residual.max(crate::matcore::residual_norm(&design, &x, &rhs));
        coords[3 * o.index()..3 * o.index() + 3].copy_from_slice(&x);
    }
    Ok(Extraction {
        point: QfsPoint::new(coords),
        residual,
    })
}

/// Least-squares QFS point for measured expectations and a known `U_ctrl(T)`.
pub fn extract_qfs(expectations: &ExpectationSet, u_ctrl_t: &ComplexMat2) -> Result<QfsPoint> {
    extract_qfs_with_residual(expectations, u_ctrl_t).map(|e| e.point)
}

/// Data-parallel extraction; output order follows input order.
pub fn extract_batch(items: &[(ExpectationSet, ComplexMat2)]) -> Result<Vec<QfsPoint>> {
    items.par_iter().map(|(e, u)| extract_qfs(e, u)).collect()
}

/// Full pipeline from a simulation: expectations from the trace formula,
/// then the least-squares solve.
pub fn qfs_from_evolution(result: &EvolutionResult) -> Result<QfsPoint> {
    let mut values = [[0.0; 3]; 6];
    for (row, s) in values.iter_mut().zip(PauliState::ALL) {
        let rho = s.density_matrix();
        for (v, o) in row.iter_mut().zip(&result.o_tilde) {
            *v = crate::qsim::expectation(&result.u_ctrl_final, &rho, o)?;
        }
    }
    extract_qfs(&ExpectationSet { values }, &result.u_ctrl_final)
}
