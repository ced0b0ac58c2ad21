//! Trotterised evolution of the driven, noisy qubit.
//!
//! The control part `H_ctrl = Ω σz/2 + Σ f_j σ_j/2` is exponentiated step by
//! step and accumulated with a prefix scan, giving `U_ctrl(t_j)` for every
//! step. Each noise realisation is then moved into the control frame,
//! `H_I(t_j) = U_ctrl†(t_j) H_noise(t_j) U_ctrl(t_j)`, and only the final
//! interaction propagator `U_I(T)` is formed, by binary-tree reduction.
//! The bath's effect on an observable `O` is summarised by
//! `Õ = ⟨Ũ_I† O Ũ_I⟩` with `Ũ_I = U_ctrl(T) U_I(T) U_ctrl†(T)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matcore::{
    expm_pauli, expm_skew, prefix_scan_in_place, sequential_fold, sequential_products,
    tree_reduce_in_place, ComplexMat2, DEFAULT_TOL,
};
use crate::noisegen::{synthesize, NoiseModel, NoiseRealization, TimeGrid};
use crate::pulsegen::ControlField;
use crate::rng::StreamId;
use crate::{Error, Result};

/// Energy gap used when none is configured (time unit `T = 1`).
pub const DEFAULT_OMEGA: f64 = 12.0;
pub const DEFAULT_REALISATIONS: usize = 2000;

/// Measured observables, in output order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    X,
    Y,
    Z,
}

impl Observable {
    pub const ALL: [Observable; 3] = [Self::X, Self::Y, Self::Z];

    pub fn matrix(self) -> ComplexMat2 {
        match self {
            Self::X => ComplexMat2::sigma_x(),
            Self::Y => ComplexMat2::sigma_y(),
            Self::Z => ComplexMat2::sigma_z(),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::X => "x",
            Self::Y => "y",
            Self::Z => "z",
        }
    }
}

/// The six Pauli eigenstates, in the fixed order `x+, x−, y+, y−, z+, z−`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PauliState {
    XPlus,
    XMinus,
    YPlus,
    YMinus,
    ZPlus,
    ZMinus,
}

impl PauliState {
    pub const ALL: [PauliState; 6] = [
        Self::XPlus,
        Self::XMinus,
        Self::YPlus,
        Self::YMinus,
        Self::ZPlus,
        Self::ZMinus,
    ];

    /// `ρ = (I ± σ)/2`.
    pub fn density_matrix(self) -> ComplexMat2 {
        let (sign, axis) = match self {
            Self::XPlus => (1.0, Observable::X),
            Self::XMinus => (-1.0, Observable::X),
            Self::YPlus => (1.0, Observable::Y),
            Self::YMinus => (-1.0, Observable::Y),
            Self::ZPlus => (1.0, Observable::Z),
            Self::ZMinus => (-1.0, Observable::Z),
        };
        (ComplexMat2::identity() + axis.matrix().scale_real(sign)).scale_real(0.5)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub grid: TimeGrid,
    pub omega: f64,
    pub realisations: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid: TimeGrid::default(),
            omega: DEFAULT_OMEGA,
            realisations: DEFAULT_REALISATIONS,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.realisations == 0 {
            return Err(Error::InvalidParameter("need at least one realisation".into()));
        }
        if !self.omega.is_finite() {
            return Err(Error::InvalidParameter(format!("omega {} is not finite", self.omega)));
        }
        Ok(())
    }
}

/// Final-time propagators and ensemble noise operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub u_ctrl_final: ComplexMat2,
    /// `Ũ_I(T)` per realisation, in realisation order.
    pub u_tilde_i: Vec<ComplexMat2>,
    /// `Õ` for X, Y, Z.
    pub o_tilde: [ComplexMat2; 3],
}

fn check_len(what: &'static str, left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { what, left, right });
    }
    Ok(())
}

#[inline]
fn ctrl_coefficients(cfg: &SimConfig, field: &ControlField, j: usize) -> (f64, f64, f64) {
    (
        0.5 * field.f_x[j],
        0.5 * field.f_y[j],
        0.5 * (cfg.omega + field.f_z[j]),
    )
}

/// Per-step control and noise Hamiltonians.
pub fn step_hamiltonians(
    field: &ControlField,
    noise: &NoiseRealization,
    cfg: &SimConfig,
) -> Result<(Vec<ComplexMat2>, Vec<ComplexMat2>)> {
    let m = cfg.grid.num_steps;
    check_len("control field vs grid", field.len(), m)?;
    check_len("noise x axis vs grid", noise.beta_x.len(), m)?;
    check_len("noise z axis vs grid", noise.beta_z.len(), m)?;
    check_len("control field axes", field.f_y.len(), field.f_z.len())?;
    check_len("control field axes", field.f_x.len(), field.f_y.len())?;
    let h_ctrl = (0..m)
        .map(|j| {
            let (bx, by, bz) = ctrl_coefficients(cfg, field, j);
            ComplexMat2::from_pauli(0.0, bx, by, bz)
        })
        .collect();
    let h_noise = (0..m)
        .map(|j| ComplexMat2::from_pauli(0.0, noise.beta_x[j], 0.0, noise.beta_z[j]))
        .collect();
    Ok((h_ctrl, h_noise))
}

/// `U_ctrl(t_j) = Π_{k≤j} exp(−i H_ctrl(t_k) Δt)` for every step, by prefix scan.
pub fn control_unitaries(h_ctrl: &[ComplexMat2], dt: f64) -> Result<Vec<ComplexMat2>> {
    if h_ctrl.is_empty() {
        return Err(Error::Empty("control Hamiltonian steps"));
    }
    let mut u = h_ctrl
        .iter()
        .map(|h| expm_skew(h, dt))
        .collect::<Result<Vec<_>>>()?;
    prefix_scan_in_place(&mut u);
    Ok(u)
}

/// `U_I(T)`: tree-reduced product of `exp(−i H_I(t_j) Δt)`.
pub fn interaction_unitary(
    u_ctrl: &[ComplexMat2],
    h_noise: &[ComplexMat2],
    dt: f64,
) -> Result<ComplexMat2> {
    check_len("control unitaries vs noise steps", u_ctrl.len(), h_noise.len())?;
    if u_ctrl.is_empty() {
        return Err(Error::Empty("interaction steps"));
    }
    let mut factors = u_ctrl
        .iter()
        .zip(h_noise)
        .map(|(u, h)| expm_skew(&(u.dagger() * *h * *u), dt))
        .collect::<Result<Vec<_>>>()?;
    tree_reduce_in_place(&mut factors);
    Ok(factors[0])
}

/// `Ũ_I = U_ctrl U_I U_ctrl†`, so that `U_ctrl U_I = Ũ_I U_ctrl`.
pub fn modified_interaction_unitary(u_ctrl_t: &ComplexMat2, u_i_t: &ComplexMat2) -> ComplexMat2 {
    u_i_t.conjugate_by(u_ctrl_t)
}

/// Trotterised propagator of the total Hamiltonian; the decomposition oracle.
pub fn total_unitary(h_ctrl: &[ComplexMat2], h_noise: &[ComplexMat2], dt: f64) -> Result<ComplexMat2> {
    check_len("control vs noise steps", h_ctrl.len(), h_noise.len())?;
    if h_ctrl.is_empty() {
        return Err(Error::Empty("Hamiltonian steps"));
    }
    let mut factors = h_ctrl
        .iter()
        .zip(h_noise)
        .map(|(a, b)| expm_skew(&(*a + *b), dt))
        .collect::<Result<Vec<_>>>()?;
    tree_reduce_in_place(&mut factors);
    Ok(factors[0])
}

/// Control propagators for one field plus the noise axes expressed in the
/// control frame at every step.
///
/// Since `H_noise = βx σx + βz σz`, the frame rotation is linear in the
/// noise: `H_I(t_j) = βx(t_j)·r_x(t_j) + βz(t_j)·r_z(t_j)` where `r_a` are
/// the Pauli vectors of `U_ctrl† σ_a U_ctrl`. Precomputing them once per
/// field makes each realisation cost one exponential and one product per step.
#[derive(Clone, Debug)]
pub struct ControlFrame {
    pub u_ctrl: Vec<ComplexMat2>,
    rot_x: Vec<[f64; 3]>,
    rot_z: Vec<[f64; 3]>,
    dt: f64,
}

fn pauli_vector(m: &ComplexMat2) -> [f64; 3] {
    let (_, bx, by, bz) = m.pauli_coefficients();
    [bx, by, bz]
}

impl ControlFrame {
    pub fn new(cfg: &SimConfig, field: &ControlField) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.grid.num_steps;
        check_len("control field vs grid", field.len(), m)?;
        check_len("control field axes", field.f_y.len(), m)?;
        check_len("control field axes", field.f_z.len(), m)?;
        let dt = cfg.grid.dt();
        let mut u_ctrl: Vec<ComplexMat2> = (0..m)
            .map(|j| {
                let (bx, by, bz) = ctrl_coefficients(cfg, field, j);
                expm_pauli(0.0, bx, by, bz, dt)
            })
            .collect();
        if !u_ctrl.iter().all(ComplexMat2::is_finite) {
            return Err(Error::InvalidPulse("control field produces non-finite propagators".into()));
        }
        prefix_scan_in_place(&mut u_ctrl);
        let (sx, sz) = (ComplexMat2::sigma_x(), ComplexMat2::sigma_z());
        let rot_x = u_ctrl.iter().map(|u| pauli_vector(&(u.dagger() * sx * *u))).collect();
        let rot_z = u_ctrl.iter().map(|u| pauli_vector(&(u.dagger() * sz * *u))).collect();
        Ok(Self {
            u_ctrl,
            rot_x,
            rot_z,
            dt,
        })
    }

    pub fn final_unitary(&self) -> ComplexMat2 {
        *self.u_ctrl.last().expect("frame has at least two steps")
    }

    pub fn num_steps(&self) -> usize {
        self.u_ctrl.len()
    }

    /// `U_I(T)` for one realisation, reusing `buf` for the factors.
    pub fn interaction_unitary(
        &self,
        noise: &NoiseRealization,
        buf: &mut Vec<ComplexMat2>,
    ) -> Result<ComplexMat2> {
        let m = self.num_steps();
        check_len("noise x axis vs grid", noise.beta_x.len(), m)?;
        check_len("noise z axis vs grid", noise.beta_z.len(), m)?;
        buf.clear();
        for j in 0..m {
            let (bx, bz) = (noise.beta_x[j], noise.beta_z[j]);
            let (rx, rz) = (&self.rot_x[j], &self.rot_z[j]);
            buf.push(expm_pauli(
                0.0,
                bx * rx[0] + bz * rz[0],
                bx * rx[1] + bz * rz[1],
                bx * rx[2] + bz * rz[2],
                self.dt,
            ));
        }
        if !buf.iter().all(ComplexMat2::is_finite) {
            return Err(Error::InvalidNoise("noise realisation is not finite".into()));
        }
        tree_reduce_in_place(buf);
        Ok(buf[0])
    }

    /// `Ũ_I(T)` for one realisation.
    pub fn modified_interaction_unitary(
        &self,
        noise: &NoiseRealization,
        buf: &mut Vec<ComplexMat2>,
    ) -> Result<ComplexMat2> {
        let u_i = self.interaction_unitary(noise, buf)?;
        Ok(modified_interaction_unitary(&self.final_unitary(), &u_i))
    }
}

/// Sum with a fixed pairwise association order.
pub fn pairwise_sum(items: &[ComplexMat2]) -> ComplexMat2 {
    match items.len() {
        0 => ComplexMat2::zero(),
        1 => items[0],
        n => {
            let (a, b) = items.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// `Õ_O = (1/K) Σ_k Ũ_k† O Ũ_k` for each observable.
pub fn noise_operators(u_tilde: &[ComplexMat2]) -> Result<[ComplexMat2; 3]> {
    if u_tilde.is_empty() {
        return Err(Error::Empty("ensemble of modified interaction unitaries"));
    }
    let k = u_tilde.len() as f64;
    Ok(Observable::ALL.map(|o| {
        let obs = o.matrix();
        let terms: Vec<ComplexMat2> = u_tilde.iter().map(|u| u.dagger() * obs * *u).collect();
        pairwise_sum(&terms).scale_real(1.0 / k)
    }))
}

/// Ensemble over realisations produced by `source(k)`, `k = 0…K−1`.
///
/// Realisations are evaluated in parallel; the average uses a fixed
/// reduction order, so the result does not depend on the worker count.
pub fn ensemble_with<F>(cfg: &SimConfig, field: &ControlField, source: F) -> Result<EvolutionResult>
where
    F: Fn(usize) -> Result<NoiseRealization> + Sync,
{
    let frame = ControlFrame::new(cfg, field)?;
    ensemble_in_frame(cfg, &frame, source)
}

/// As [`ensemble_with`] but reusing a precomputed control frame.
pub fn ensemble_in_frame<F>(cfg: &SimConfig, frame: &ControlFrame, source: F) -> Result<EvolutionResult>
where
    F: Fn(usize) -> Result<NoiseRealization> + Sync,
{
    cfg.validate()?;
    let u_tilde_i = (0..cfg.realisations)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(frame.num_steps()),
            |buf, k| {
                let noise = source(k)?;
                frame.modified_interaction_unitary(&noise, buf)
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let o_tilde = noise_operators(&u_tilde_i)?;
    Ok(EvolutionResult {
        u_ctrl_final: frame.final_unitary(),
        u_tilde_i,
        o_tilde,
    })
}

/// Ensemble noise operators for a noise model; realisation `k` uses stream
/// `(master_seed, k)`.
pub fn ensemble_otilde(
    cfg: &SimConfig,
    field: &ControlField,
    model: &NoiseModel,
    master_seed: u64,
) -> Result<EvolutionResult> {
    model.validate(&cfg.grid)?;
    ensemble_with(cfg, field, |k| {
        synthesize(model, &cfg.grid, StreamId::new(master_seed, k as u64))
    })
}

/// Single-threaded reference path: sequential products for `U_ctrl`, the
/// literal frame change `U† H_noise U` at every step, and a sequential fold
/// for `U_I`. Same result as [`ensemble_otilde`] up to rounding.
pub fn ensemble_otilde_sequential(
    cfg: &SimConfig,
    field: &ControlField,
    model: &NoiseModel,
    master_seed: u64,
) -> Result<EvolutionResult> {
    cfg.validate()?;
    model.validate(&cfg.grid)?;
    let dt = cfg.grid.dt();
    let zero = NoiseRealization::zeros(cfg.grid.num_steps);
    let (h_ctrl, _) = step_hamiltonians(field, &zero, cfg)?;
    let exps = h_ctrl
        .iter()
        .map(|h| expm_skew(h, dt))
        .collect::<Result<Vec<_>>>()?;
    let u_ctrl = sequential_products(&exps);
    let u_final = *u_ctrl.last().expect("grid has at least two steps");
    let mut u_tilde_i = Vec::with_capacity(cfg.realisations);
    for k in 0..cfg.realisations {
        let noise = synthesize(model, &cfg.grid, StreamId::new(master_seed, k as u64))?;
        let (_, h_noise) = step_hamiltonians(field, &noise, cfg)?;
        let factors = u_ctrl
            .iter()
            .zip(&h_noise)
            .map(|(u, h)| expm_skew(&(u.dagger() * *h * *u), dt))
            .collect::<Result<Vec<_>>>()?;
        let u_i = sequential_fold(&factors);
        u_tilde_i.push(modified_interaction_unitary(&u_final, &u_i));
    }
    let o_tilde = noise_operators(&u_tilde_i)?;
    Ok(EvolutionResult {
        u_ctrl_final: u_final,
        u_tilde_i,
        o_tilde,
    })
}

/// Checks Hermitian, unit trace and positive semi-definite within `1e−9`.
pub fn validate_density_matrix(rho: &ComplexMat2) -> Result<()> {
    if !rho.is_finite() {
        return Err(Error::NotDensityMatrix("non-finite entries".into()));
    }
    let herm = rho.hermiticity_defect();
    if herm > DEFAULT_TOL {
        return Err(Error::NotDensityMatrix(format!("not Hermitian (defect {herm:.3e})")));
    }
    let tr = rho.trace();
    if (tr - Complex64::new(1.0, 0.0)).norm() > DEFAULT_TOL {
        return Err(Error::NotDensityMatrix(format!("trace {tr} is not 1")));
    }
    let min_eig = rho.hermitian_eigenvalues()[0];
    if min_eig < -DEFAULT_TOL {
        return Err(Error::NotDensityMatrix(format!("negative eigenvalue {min_eig:.3e}")));
    }
    Ok(())
}

/// `Tr[U_ctrl ρ U_ctrl† Õ]`.
pub fn expectation(u_ctrl_t: &ComplexMat2, rho: &ComplexMat2, o_tilde: &ComplexMat2) -> Result<f64> {
    validate_density_matrix(rho)?;
    let herm = o_tilde.hermiticity_defect();
    if herm > DEFAULT_TOL {
        return Err(Error::InvalidOperator(format!("not Hermitian (defect {herm:.3e})")));
    }
    Ok((rho.conjugate_by(u_ctrl_t) * *o_tilde).trace().re)
}

/// Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// `⟨Tr[U ρ U† O]⟩` with `U` Trotterised from the total Hamiltonian.
///
/// Independent of the interaction-picture factorisation; used to cross-check it.
pub fn direct_expectation(
    cfg: &SimConfig,
    field: &ControlField,
    model: &NoiseModel,
    rho: &ComplexMat2,
    observable: &ComplexMat2,
    master_seed: u64,
) -> Result<MonteCarloEstimate> {
    cfg.validate()?;
    model.validate(&cfg.grid)?;
    validate_density_matrix(rho)?;
    let dt = cfg.grid.dt();
    let values = (0..cfg.realisations)
        .into_par_iter()
        .map(|k| {
            let noise = synthesize(model, &cfg.grid, StreamId::new(master_seed, k as u64))?;
            let (h_ctrl, h_noise) = step_hamiltonians(field, &noise, cfg)?;
            let u = total_unitary(&h_ctrl, &h_noise, dt)?;
            Ok((rho.conjugate_by(&u) * *observable).trace().re)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        std_err: (var / n).sqrt(),
        samples: values.len(),
    })
}
