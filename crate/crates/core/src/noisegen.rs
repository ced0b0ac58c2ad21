//! Classical noise processes acting on the qubit's x and z axes.
//!
//! Realisations are built by spectral synthesis: each one-sided frequency
//! bin `k = 1…M/2` of a length-`M` DFT gets amplitude `√(2·S(k)/ΣS)` and an
//! independent uniform phase, and the Hermitian-symmetric spectrum is
//! inverse transformed. The normalisation makes the expected per-sample
//! variance exactly 1 before any envelope or scale factor is applied.
//! The DC bin is always empty, so every process is zero mean.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::rng::{domain, StreamId};
use crate::{Error, Result};

/// Uniform sampling of `[0, T]` with `M` steps; samples sit at step midpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub total_time: f64,
    pub num_steps: usize,
}

impl TimeGrid {
    pub fn new(total_time: f64, num_steps: usize) -> Result<Self> {
        let grid = Self {
            total_time,
            num_steps,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_steps < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 steps, got {}",
                self.num_steps
            )));
        }
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "total time must be positive, got {}",
                self.total_time
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.total_time / self.num_steps as f64
    }

    /// Midpoint of step `j`: `(j + 0.5)·dt`.
    #[inline]
    pub fn t(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.num_steps).map(|j| self.t(j)).collect()
    }

    /// Highest one-sided frequency bin, `M/2`.
    pub fn nyquist_bin(&self) -> usize {
        self.num_steps / 2
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            total_time: 1.0,
            num_steps: 1024,
        }
    }
}

/// Bump standard deviation in bins when none is configured.
pub const DEFAULT_BUMP_WIDTH_BINS: f64 = 10.0;
/// Bump height relative to `S(1)` when none is configured.
pub const DEFAULT_BUMP_HEIGHT: f64 = 0.5;

fn default_bump_width() -> f64 {
    DEFAULT_BUMP_WIDTH_BINS
}

fn default_bump_height() -> f64 {
    DEFAULT_BUMP_HEIGHT
}

/// Parametric PSD shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseFamily {
    /// `S(k) = 1/k^exponent`.
    OneOverF { exponent: f64 },
    /// `1/k^exponent` plus a Gaussian bump centred on `peak_bin`. The bump
    /// height is given relative to `S(1)`.
    OneOverFBump {
        exponent: f64,
        peak_bin: f64,
        #[serde(default = "default_bump_width")]
        bump_width_bins: f64,
        #[serde(default = "default_bump_height")]
        bump_height: f64,
    },
    /// Flat spectrum up to bin `(M/2)/division_factor`, zero above.
    ColoredGaussian { division_factor: f64 },
}

/// Broad class of a noise process, used as a classification label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseType {
    OneOverF,
    OneOverFBump,
    Colored,
}

impl NoiseType {
    pub const ALL: [NoiseType; 3] = [Self::OneOverF, Self::OneOverFBump, Self::Colored];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::OneOverF => "1/f",
            Self::OneOverFBump => "1/f+bump",
            Self::Colored => "coloured",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for NoiseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_true() -> bool {
    true
}

fn default_half() -> f64 {
    0.5
}

fn default_one() -> f64 {
    1.0
}

/// A noise process: PSD family, optional triangular envelope, and scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub family: NoiseFamily,
    #[serde(default = "default_true")]
    pub stationary: bool,
    /// Envelope peak as a fraction of `T`; only used when non-stationary.
    #[serde(default = "default_half")]
    pub envelope_peak_fraction: f64,
    #[serde(default = "default_one")]
    pub scale_factor: f64,
}

impl NoiseModel {
    pub fn new(family: NoiseFamily) -> Self {
        Self {
            family,
            stationary: true,
            envelope_peak_fraction: 0.5,
            scale_factor: 1.0,
        }
    }

    pub fn one_over_f(exponent: f64) -> Self {
        Self::new(NoiseFamily::OneOverF { exponent })
    }

    pub fn one_over_f_bump(exponent: f64, peak_bin: f64) -> Self {
        Self::new(NoiseFamily::OneOverFBump {
            exponent,
            peak_bin,
            bump_width_bins: default_bump_width(),
            bump_height: default_bump_height(),
        })
    }

    pub fn colored(division_factor: f64) -> Self {
        Self::new(NoiseFamily::ColoredGaussian { division_factor })
    }

    pub fn non_stationary(mut self, envelope_peak_fraction: f64) -> Self {
        self.stationary = false;
        self.envelope_peak_fraction = envelope_peak_fraction;
        self
    }

    pub fn with_scale(mut self, scale_factor: f64) -> Self {
        self.scale_factor = scale_factor;
        self
    }

    pub fn noise_type(&self) -> NoiseType {
        match self.family {
            NoiseFamily::OneOverF { .. } => NoiseType::OneOverF,
            NoiseFamily::OneOverFBump { .. } => NoiseType::OneOverFBump,
            NoiseFamily::ColoredGaussian { .. } => NoiseType::Colored,
        }
    }

    /// Short human-readable label such as `1/f+bump (NS)`.
    pub fn label(&self) -> String {
        let mut s = self.noise_type().as_str().to_string();
        if !self.stationary {
            s.push_str(" (NS)");
        }
        s
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        let nyq = grid.nyquist_bin() as f64;
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        match self.family {
            NoiseFamily::OneOverF { exponent } if !exponent.is_finite() => {
                return Err(Error::InvalidNoise(format!("exponent {exponent} is not finite")));
            }
            NoiseFamily::OneOverFBump {
                exponent,
                peak_bin,
                bump_width_bins,
                bump_height,
            } => {
                if !exponent.is_finite() {
                    return Err(Error::InvalidNoise(format!("exponent {exponent} is not finite")));
                }
                if !(0.0..=nyq).contains(&peak_bin) {
                    return Err(Error::InvalidNoise(format!(
                        "bump peak bin {peak_bin} outside [0, {nyq}]"
                    )));
                }
                if !finite_pos(bump_width_bins) {
                    return Err(Error::InvalidNoise(format!(
                        "bump width {bump_width_bins} must be positive"
                    )));
                }
                if !(bump_height.is_finite() && bump_height >= 0.0) {
                    return Err(Error::InvalidNoise(format!(
                        "bump height {bump_height} must be non-negative"
                    )));
                }
            }
            NoiseFamily::ColoredGaussian { division_factor } if !finite_pos(division_factor) => {
                return Err(Error::InvalidNoise(format!(
                    "division factor {division_factor} must be positive"
                )));
            }
            _ => {}
        }
        if !self.stationary
            && !(self.envelope_peak_fraction > 0.0 && self.envelope_peak_fraction < 1.0)
        {
            return Err(Error::InvalidNoise(format!(
                "envelope peak fraction {} outside (0, 1)",
                self.envelope_peak_fraction
            )));
        }
        if !(self.scale_factor.is_finite() && self.scale_factor >= 0.0) {
            return Err(Error::InvalidNoise(format!(
                "scale factor {} must be non-negative",
                self.scale_factor
            )));
        }
        Ok(())
    }
}

/// One sampled noise trajectory. `beta_y` is identically zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    pub beta_x: Vec<f64>,
    pub beta_z: Vec<f64>,
}

impl NoiseRealization {
    /// Couples the axes: `beta_z = |beta_x|`.
    pub fn from_x(beta_x: Vec<f64>) -> Self {
        let beta_z = beta_x.iter().map(|v| v.abs()).collect();
        Self { beta_x, beta_z }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            beta_x: vec![0.0; len],
            beta_z: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.beta_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta_x.is_empty()
    }

    /// Multiplies both axes by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            beta_x: self.beta_x.iter().map(|v| v * c).collect(),
            beta_z: self.beta_z.iter().map(|v| v * c).collect(),
        }
    }
}

/// One-sided PSD on bins `0…M/2`, before normalisation (`S(1) = 1` for the
/// 1/f families).
pub fn psd_profile(model: &NoiseModel, grid: &TimeGrid) -> Result<Vec<f64>> {
    model.validate(grid)?;
    let nyq = grid.nyquist_bin();
    let mut s = vec![0.0; nyq + 1];
    match model.family {
        NoiseFamily::OneOverF { exponent } => {
            for (k, v) in s.iter_mut().enumerate().skip(1) {
                *v = (k as f64).powf(-exponent);
            }
        }
        NoiseFamily::OneOverFBump {
            exponent,
            peak_bin,
            bump_width_bins,
            bump_height,
        } => {
            let w2 = 2.0 * bump_width_bins * bump_width_bins;
            for (k, v) in s.iter_mut().enumerate().skip(1) {
                let kf = k as f64;
                *v = kf.powf(-exponent) + bump_height * (-(kf - peak_bin).powi(2) / w2).exp();
            }
        }
        NoiseFamily::ColoredGaussian { division_factor } => {
            let cutoff = nyq as f64 / division_factor;
            for (k, v) in s.iter_mut().enumerate().skip(1) {
                if k as f64 <= cutoff {
                    *v = 1.0;
                }
            }
        }
    }
    Ok(s)
}

/// Piecewise-linear envelope: 0 at `t = 0` and `t = T`, 1 at `peak·T`.
pub fn triangular_envelope_at(t: f64, total_time: f64, peak_fraction: f64) -> f64 {
    let peak = peak_fraction * total_time;
    let v = if t <= peak {
        t / peak
    } else {
        (total_time - t) / (total_time - peak)
    };
    v.clamp(0.0, 1.0)
}

/// The envelope sampled at the grid midpoints.
pub fn triangular_envelope(grid: &TimeGrid, peak_fraction: f64) -> Result<Vec<f64>> {
    if !(peak_fraction > 0.0 && peak_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "envelope peak fraction {peak_fraction} outside (0, 1)"
        )));
    }
    Ok((0..grid.num_steps)
        .map(|j| triangular_envelope_at(grid.t(j), grid.total_time, peak_fraction))
        .collect())
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Draws one realisation. Deterministic in `(model, grid, stream)`.
pub fn synthesize(model: &NoiseModel, grid: &TimeGrid, stream: StreamId) -> Result<NoiseRealization> {
    let psd = psd_profile(model, grid)?;
    let m = grid.num_steps;
    let total: f64 = psd.iter().sum();
    if total <= 0.0 || model.scale_factor == 0.0 {
        return Ok(NoiseRealization::zeros(m));
    }

    let mut rng = stream.rng(domain::NOISE);
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    for (k, &sk) in psd.iter().enumerate().skip(1) {
        let phase = TAU * rng.random::<f64>();
        let amp = (2.0 * sk / total).sqrt();
        if 2 * k == m {
            spec[k] = Complex64::new(amp * phase.cos(), 0.0);
        } else {
            let z = Complex64::from_polar(0.5 * amp, phase);
            spec[k] = z;
            spec[m - k] = z.conj();
        }
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(m));
    fft.process(&mut spec);

    let mut beta_x: Vec<f64> = spec.iter().map(|z| z.re).collect();
    if !model.stationary {
        let env = triangular_envelope(grid, model.envelope_peak_fraction)?;
        beta_x.iter_mut().zip(&env).for_each(|(v, e)| *v *= e);
    }
    if model.scale_factor != 1.0 {
        beta_x.iter_mut().for_each(|v| *v *= model.scale_factor);
    }
    Ok(NoiseRealization::from_x(beta_x))
}

/// `Σ_t |n_t|²`.
pub fn signal_energy(series: &[f64]) -> f64 {
    series.iter().map(|v| v * v).sum()
}

/// `(1 − ratio)·a + ratio·b` on the x axis, with `beta_z` recomputed.
pub fn mix(a: &NoiseRealization, b: &NoiseRealization, ratio: f64) -> Result<NoiseRealization> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "mixed realisations",
            left: a.len(),
            right: b.len(),
        });
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidParameter(format!("mix ratio {ratio} outside [0, 1]")));
    }
    let x = a
        .beta_x
        .iter()
        .zip(&b.beta_x)
        .map(|(p, q)| (1.0 - ratio) * p + ratio * q)
        .collect();
    Ok(NoiseRealization::from_x(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::default()
    }

    #[test]
    fn one_over_f_ratio() {
        let s = psd_profile(&NoiseModel::one_over_f(1.0), &grid()).unwrap();
        assert_eq!(s.len(), 513);
        assert_eq!(s[0], 0.0);
        assert!((s[1] / s[2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bump_raises_peak_bin() {
        let s = psd_profile(&NoiseModel::one_over_f_bump(1.0, 200.0), &grid()).unwrap();
        assert!(s[200] > 1.0 / 200.0);
        assert!(s[200] > s[180] && s[200] > s[220]);
    }

    #[test]
    fn colored_cutoff() {
        let s = psd_profile(&NoiseModel::colored(2.0), &grid()).unwrap();
        let max = s.iter().cloned().fold(0.0, f64::max);
        assert!(s[256] > 0.0);
        assert!(s[257..].iter().all(|&v| v <= 1e-12 * max));
    }

    #[test]
    fn bump_outside_band_is_rejected() {
        let m = NoiseModel::one_over_f_bump(1.0, 600.0);
        assert!(matches!(psd_profile(&m, &grid()), Err(Error::InvalidNoise(_))));
    }

    #[test]
    fn envelope_values() {
        assert_eq!(triangular_envelope_at(0.5, 1.0, 0.5), 1.0);
        assert_eq!(triangular_envelope_at(0.0, 1.0, 0.5), 0.0);
        assert!((triangular_envelope_at(0.625, 1.0, 0.25) - 0.5).abs() < 1e-15);
        assert!(triangular_envelope(&grid(), 1.0).is_err());
        assert!(triangular_envelope(&grid(), 0.0).is_err());
    }

    #[test]
    fn zero_scale_gives_zero_realisation() {
        let m = NoiseModel::one_over_f(1.0).with_scale(0.0);
        let r = synthesize(&m, &grid(), StreamId::new(3, 0)).unwrap();
        assert!(r.beta_x.iter().chain(&r.beta_z).all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_per_stream() {
        let m = NoiseModel::one_over_f_bump(1.0, 200.0);
        let a = synthesize(&m, &grid(), StreamId::new(9, 4)).unwrap();
        let b = synthesize(&m, &grid(), StreamId::new(9, 4)).unwrap();
        let c = synthesize(&m, &grid(), StreamId::new(9, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn z_axis_is_abs_of_x() {
        let m = NoiseModel::colored(4.0).non_stationary(0.3);
        let r = synthesize(&m, &grid(), StreamId::new(1, 1)).unwrap();
        for (x, z) in r.beta_x.iter().zip(&r.beta_z) {
            assert_eq!(*z, x.abs());
        }
    }

    #[test]
    fn energy_examples() {
        assert_eq!(signal_energy(&[1.0, 2.0, 2.0]), 9.0);
        assert_eq!(signal_energy(&[0.0; 5]), 0.0);
    }

    #[test]
    fn mix_endpoints_and_mean() {
        let a = NoiseRealization::from_x(vec![1.0, -2.0, 3.0]);
        let b = NoiseRealization::from_x(vec![-1.0, 2.0, -3.0]);
        assert_eq!(mix(&a, &b, 0.0).unwrap(), a);
        assert_eq!(mix(&a, &b, 1.0).unwrap(), b);
        let mid = mix(&a, &b, 0.5).unwrap();
        assert_eq!(mid.beta_x, vec![0.0, 0.0, 0.0]);
        let short = NoiseRealization::from_x(vec![1.0]);
        assert!(mix(&a, &short, 0.5).is_err());
    }

    #[test]
    fn per_sample_variance_is_unity_for_fixed_phases() {
        // Interior bins contribute exactly a_k²/2 to the time average.
        let m = NoiseModel::one_over_f(1.0);
        let r = synthesize(&m, &TimeGrid::new(1.0, 1023).unwrap(), StreamId::new(2, 0)).unwrap();
        let mean_sq = signal_energy(&r.beta_x) / r.len() as f64;
        assert!((mean_sq - 1.0).abs() < 1e-12, "{mean_sq}");
    }
}
