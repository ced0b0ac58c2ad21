//! Gaussian pulse trains and CPMG factories.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::noisegen::TimeGrid;
use crate::rng::{domain, StreamId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    #[default]
    X,
    Y,
    Z,
}

/// Parameters of `f(t) = Σ_n A_n exp(−(t − τ_n)²/(2σ²))`, `σ = T/(λ·M)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlPulseSpec {
    pub amplitudes: Vec<f64>,
    pub centers: Vec<f64>,
    /// λ; larger values give narrower pulses.
    pub width_param: f64,
    #[serde(default)]
    pub axis: PauliAxis,
}

impl ControlPulseSpec {
    pub fn n_max(&self) -> usize {
        self.amplitudes.len()
    }

    /// `σ = T/(λ·M)`.
    pub fn sigma(&self, grid: &TimeGrid) -> f64 {
        grid.total_time / (self.width_param * grid.num_steps as f64)
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        if self.amplitudes.len() != self.centers.len() {
            return Err(Error::InvalidPulse(format!(
                "{} amplitudes but {} centers",
                self.amplitudes.len(),
                self.centers.len()
            )));
        }
        if !(self.width_param.is_finite() && self.width_param > 0.0) {
            return Err(Error::InvalidPulse(format!(
                "width parameter {} must be positive",
                self.width_param
            )));
        }
        if let Some(a) = self.amplitudes.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidPulse(format!("amplitude {a} is not finite")));
        }
        if let Some(c) = self
            .centers
            .iter()
            .find(|c| !(0.0..=grid.total_time).contains(*c))
        {
            return Err(Error::InvalidPulse(format!(
                "pulse center {c} outside [0, {}]",
                grid.total_time
            )));
        }
        Ok(())
    }
}

/// Sampled control amplitudes per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    pub f_x: Vec<f64>,
    pub f_y: Vec<f64>,
    pub f_z: Vec<f64>,
}

impl ControlField {
    pub fn zeros(len: usize) -> Self {
        Self {
            f_x: vec![0.0; len],
            f_y: vec![0.0; len],
            f_z: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.f_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_x.is_empty()
    }

    pub fn axis(&self, axis: PauliAxis) -> &[f64] {
        match axis {
            PauliAxis::X => &self.f_x,
            PauliAxis::Y => &self.f_y,
            PauliAxis::Z => &self.f_z,
        }
    }
}

/// Samples the pulse train at the grid midpoints.
pub fn gaussian_train(spec: &ControlPulseSpec, grid: &TimeGrid) -> Result<ControlField> {
    grid.validate()?;
    spec.validate(grid)?;
    let sigma = spec.sigma(grid);
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let samples: Vec<f64> = (0..grid.num_steps)
        .map(|j| {
            let t = grid.t(j);
            spec.amplitudes
                .iter()
                .zip(&spec.centers)
                .map(|(a, tau)| a * (-(t - tau).powi(2) * inv_two_var).exp())
                .sum()
        })
        .collect();
    let mut field = ControlField::zeros(grid.num_steps);
    match spec.axis {
        PauliAxis::X => field.f_x = samples,
        PauliAxis::Y => field.f_y = samples,
        PauliAxis::Z => field.f_z = samples,
    }
    Ok(field)
}

pub const CPMG_PULSES: usize = 5;
pub const IDEAL_WIDTH_PARAM: f64 = 1.0 / 96.0;
pub const REALISTIC_WIDTH_PARAM: f64 = 1.0 / 24.0;

/// Nominal CPMG center `((n − 0.5)/n_max)·T` for 1-based `n`.
pub fn cpmg_center(n: usize, n_max: usize, total_time: f64) -> f64 {
    (n as f64 - 0.5) / n_max as f64 * total_time
}

/// Five jitter-free π pulses on x with λ = 1/96.
pub fn cpmg_ideal(grid: &TimeGrid) -> ControlPulseSpec {
    ControlPulseSpec {
        amplitudes: vec![PI; CPMG_PULSES],
        centers: (1..=CPMG_PULSES)
            .map(|n| cpmg_center(n, CPMG_PULSES, grid.total_time))
            .collect(),
        width_param: IDEAL_WIDTH_PARAM,
        axis: PauliAxis::X,
    }
}

/// Five x pulses with λ = 1/24, timing jitter `δτ ~ U[−24T/M, 24T/M]` and
/// amplitude error `ε ~ U[−π/5, π/5]`, drawn independently per pulse.
/// Jittered centers are clamped to `[0, T]`.
pub fn cpmg_realistic(grid: &TimeGrid, stream: StreamId) -> ControlPulseSpec {
    let mut rng = stream.rng(domain::PULSE);
    let max_jitter = 24.0 * grid.total_time / grid.num_steps as f64;
    let max_eps = PI / 5.0;
    let mut amplitudes = Vec::with_capacity(CPMG_PULSES);
    let mut centers = Vec::with_capacity(CPMG_PULSES);
    for n in 1..=CPMG_PULSES {
        let jitter = rng.random_range(-max_jitter..=max_jitter);
        let eps = rng.random_range(-max_eps..=max_eps);
        let tau = cpmg_center(n, CPMG_PULSES, grid.total_time) + jitter;
        centers.push(tau.clamp(0.0, grid.total_time));
        amplitudes.push(PI + eps);
    }
    ControlPulseSpec {
        amplitudes,
        centers,
        width_param: REALISTIC_WIDTH_PARAM,
        axis: PauliAxis::X,
    }
}
