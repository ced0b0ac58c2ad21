//! End-to-end experiment drivers shared by the CLI and the acceptance tests:
//! identification against references, peak refinement, the three sweeps and
//! the simulator benchmark.
//!
//! Every simulation draws its noise from a seed derived from the master seed,
//! a role, and an index, so experiments never share random streams.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{peak_label, refine_peak_search, ReferencePoint, RefineOutcome};
use crate::noisegen::{mix, synthesize, NoiseFamily, NoiseModel};
use crate::pulsegen::{cpmg_ideal, cpmg_realistic, gaussian_train, ControlField, ControlPulseSpec};
use crate::qfs::{extract_batch, qfs_from_evolution, ExpectationSet, QfsPoint};
use crate::qsim::{
    ensemble_in_frame, ensemble_otilde, ensemble_otilde_sequential, ControlFrame, EvolutionResult, SimConfig,
};
use crate::rng::{derive_seed, domain, StreamId};
use crate::{Error, Result};

/// Seed roles.
pub mod role {
    pub const SIMULATE: u64 = 1;
    pub const UNKNOWN: u64 = 2;
    pub const REFERENCE: u64 = 3;
    pub const REFINE: u64 = 4;
    pub const SWEEP: u64 = 5;
    pub const BENCH: u64 = 6;
}

pub fn role_seed(master: u64, role: u64, index: u64) -> u64 {
    derive_seed(derive_seed(master, domain::DERIVE, role), domain::DERIVE, index)
}

/// A noise model with a display label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelledModel {
    pub label: String,
    pub model: NoiseModel,
}

impl LabelledModel {
    pub fn new(model: NoiseModel) -> Self {
        Self {
            label: model.label(),
            model,
        }
    }
}

pub const REFERENCE_EXPONENT: f64 = 1.0;
pub const REFERENCE_BUMP_PEAK: f64 = 30.0;
pub const REFERENCE_DIVISION_FACTOR: f64 = 4.0;
pub const REFERENCE_ENVELOPE_PEAK: f64 = 0.5;
pub const UNKNOWN_BUMP_PEAK: f64 = 200.0;
pub const IDENTIFICATION_SEQUENCES: usize = 10;
pub const REFINE_GRID: [f64; 6] = [15.0, 30.0, 60.0, 120.0, 240.0, 480.0];
pub const REFINE_STAGES: usize = 2;

/// The six a-priori references: each family, stationary then non-stationary.
pub fn default_references() -> Vec<LabelledModel> {
    let families = [
        NoiseModel::one_over_f(REFERENCE_EXPONENT),
        NoiseModel::one_over_f_bump(REFERENCE_EXPONENT, REFERENCE_BUMP_PEAK),
        NoiseModel::colored(REFERENCE_DIVISION_FACTOR),
    ];
    families
        .iter()
        .flat_map(|m| [*m, m.non_stationary(REFERENCE_ENVELOPE_PEAK)])
        .map(LabelledModel::new)
        .collect()
}

pub fn default_unknown() -> NoiseModel {
    NoiseModel::one_over_f_bump(REFERENCE_EXPONENT, UNKNOWN_BUMP_PEAK)
}

pub fn ideal_field(cfg: &SimConfig) -> Result<ControlField> {
    gaussian_train(&cpmg_ideal(&cfg.grid), &cfg.grid)
}

/// Pulse spec of realistic sequence `s`.
pub fn realistic_spec(cfg: &SimConfig, master: u64, s: usize) -> ControlPulseSpec {
    cpmg_realistic(&cfg.grid, StreamId::new(role_seed(master, role::UNKNOWN, 0), s as u64))
}

/// Simulates one point in a prepared control frame.
pub fn point_in_frame(
    cfg: &SimConfig,
    frame: &ControlFrame,
    model: &NoiseModel,
    noise_seed: u64,
) -> Result<(EvolutionResult, QfsPoint)> {
    model.validate(&cfg.grid)?;
    let result = ensemble_in_frame(cfg, frame, |k| {
        synthesize(model, &cfg.grid, StreamId::new(noise_seed, k as u64))
    })?;
    let point = qfs_from_evolution(&result)?;
    Ok((result, point))
}

/// The unknown cluster: one point per realistic CPMG sequence, each with its
/// own pulse errors and noise ensemble.
pub fn unknown_cluster(cfg: &SimConfig, model: &NoiseModel, sequences: usize, master: u64) -> Result<Vec<QfsPoint>> {
    if sequences == 0 {
        return Err(Error::InvalidParameter("need at least one pulse sequence".into()));
    }
    (0..sequences)
        .into_par_iter()
        .map(|s| {
            let field = gaussian_train(&realistic_spec(cfg, master, s), &cfg.grid)?;
            let frame = ControlFrame::new(cfg, &field)?;
            let seed = role_seed(master, role::UNKNOWN, s as u64);
            let (_, p) = point_in_frame(cfg, &frame, model, seed)?;
            Ok(p.with_labels(model.label(), format!("cpmg-realistic-{s}"), seed))
        })
        .collect()
}

/// Reference points under the ideal CPMG pulse.
pub fn reference_points(cfg: &SimConfig, refs: &[LabelledModel], master: u64) -> Result<Vec<ReferencePoint>> {
    if refs.is_empty() {
        return Err(Error::Empty("reference models"));
    }
    let frame = ControlFrame::new(cfg, &ideal_field(cfg)?)?;
    refs.par_iter()
        .enumerate()
        .map(|(i, r)| {
            let seed = role_seed(master, role::REFERENCE, i as u64);
            let (_, p) = point_in_frame(cfg, &frame, &r.model, seed)?;
            Ok(ReferencePoint::new(r.label.clone(), p.with_labels(r.label.clone(), "cpmg-ideal", seed)))
        })
        .collect()
}

/// `template` with its bump moved to `peak`.
pub fn with_peak(template: &NoiseModel, peak: f64) -> Result<NoiseModel> {
    let mut m = *template;
    match &mut m.family {
        NoiseFamily::OneOverFBump { peak_bin, .. } => *peak_bin = peak,
        _ => return Err(Error::InvalidNoise("peak refinement needs a 1/f+bump template".into())),
    }
    Ok(m)
}

/// Multi-stage peak search against ideal-CPMG references built from
/// `template`. The reference for a given peak is the same in every stage.
pub fn refine_bump_peak(
    cfg: &SimConfig,
    cluster: &[QfsPoint],
    template: &NoiseModel,
    grid: &[f64],
    stages: usize,
    master: u64,
) -> Result<RefineOutcome> {
    with_peak(template, 0.0)?;
    let frame = ControlFrame::new(cfg, &ideal_field(cfg)?)?;
    refine_peak_search(cluster, grid, stages, |peak| {
        let model = with_peak(template, peak)?;
        let seed = role_seed(master, role::REFINE, peak.to_bits());
        let (_, p) = point_in_frame(cfg, &frame, &model, seed)?;
        Ok(p.with_labels(peak_label(peak), "cpmg-ideal", seed))
    })
}

pub const DEFAULT_WIDTHS: [f64; 6] = [1.0 / 96.0, 1.0 / 48.0, 1.0 / 24.0, 1.0 / 12.0, 1.0 / 6.0, 1.0 / 3.0];
pub const DEFAULT_RATIOS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
pub const DEFAULT_SCALES: [f64; 7] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75];

fn check_values(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("empty {what} list")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} value {v} is not finite")));
    }
    Ok(())
}

/// Ideal CPMG with widening pulses, one point per model per width.
/// Rows are ordered model-major.
pub fn pulse_width_sweep(
    cfg: &SimConfig,
    models: &[LabelledModel],
    widths: &[f64],
    master: u64,
) -> Result<Vec<QfsPoint>> {
    check_values(widths, "pulse width")?;
    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|m| (0..widths.len()).map(move |w| (m, w)))
        .collect();
    jobs.par_iter()
        .map(|&(m, w)| {
            let spec = ControlPulseSpec {
                width_param: widths[w],
                ..cpmg_ideal(&cfg.grid)
            };
            let frame = ControlFrame::new(cfg, &gaussian_train(&spec, &cfg.grid)?)?;
            let seed = role_seed(master, role::SWEEP, m as u64);
            let (_, p) = point_in_frame(cfg, &frame, &models[m].model, seed)?;
            Ok(p.with_labels(models[m].label.clone(), format!("cpmg-ideal width={}", widths[w]), seed))
        })
        .collect()
}

/// Realisation-wise mixtures `(1−r)·a + r·b` under the ideal CPMG pulse.
/// Both processes keep the same streams at every ratio.
pub fn interpolation_sweep(
    cfg: &SimConfig,
    a: &LabelledModel,
    b: &LabelledModel,
    ratios: &[f64],
    master: u64,
) -> Result<Vec<QfsPoint>> {
    check_values(ratios, "ratio")?;
    a.model.validate(&cfg.grid)?;
    b.model.validate(&cfg.grid)?;
    let frame = ControlFrame::new(cfg, &ideal_field(cfg)?)?;
    let (seed_a, seed_b) = (role_seed(master, role::SWEEP, 0), role_seed(master, role::SWEEP, 1));
    ratios
        .par_iter()
        .map(|&r| {
            let result = ensemble_in_frame(cfg, &frame, |k| {
                let na = synthesize(&a.model, &cfg.grid, StreamId::new(seed_a, k as u64))?;
                let nb = synthesize(&b.model, &cfg.grid, StreamId::new(seed_b, k as u64))?;
                mix(&na, &nb, r)
            })?;
            let label = format!("{} -> {} ratio={r}", a.label, b.label);
            Ok(qfs_from_evolution(&result)?.with_labels(label, "cpmg-ideal", seed_a))
        })
        .collect()
}

/// The same noise streams at increasing scale factors, ideal CPMG.
/// Rows are ordered model-major.
pub fn energy_sweep(cfg: &SimConfig, models: &[LabelledModel], scales: &[f64], master: u64) -> Result<Vec<QfsPoint>> {
    check_values(scales, "scale")?;
    if let Some(s) = scales.iter().find(|s| **s < 0.0) {
        return Err(Error::InvalidParameter(format!("scale {s} is negative")));
    }
    let frame = ControlFrame::new(cfg, &ideal_field(cfg)?)?;
    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|m| (0..scales.len()).map(move |s| (m, s)))
        .collect();
    jobs.par_iter()
        .map(|&(m, s)| {
            let base = &models[m].model;
            let seed = role_seed(master, role::SWEEP, m as u64);
            let scale = scales[s];
            // a zero scale is rejected by model validation; synthesise at unit
            // scale and multiply instead
            base.with_scale(1.0).validate(&cfg.grid)?;
            let result = ensemble_in_frame(cfg, &frame, |k| {
                let n = synthesize(&base.with_scale(1.0), &cfg.grid, StreamId::new(seed, k as u64))?;
                Ok(n.scaled(scale * base.scale_factor))
            })?;
            let label = format!("{} scale={scale}", models[m].label);
            Ok(qfs_from_evolution(&result)?.with_labels(label, "cpmg-ideal", seed))
        })
        .collect()
}

/// Wall-clock timings of the simulator and extraction kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub num_steps: usize,
    pub realisations: usize,
    pub threads: usize,
    pub scan_reduce_secs: f64,
    pub sequential_secs: f64,
    pub speedup: f64,
    /// Largest Frobenius distance between the two paths' noise operators.
    pub max_otilde_diff: f64,
    pub extraction_batch: usize,
    pub extraction_secs: f64,
}

/// Times the parallel scan/reduce ensemble against the sequential baseline
/// on the ideal CPMG pulse, then a batch extraction of `extraction_batch`
/// expectation sets.
pub fn bench_simulator(
    cfg: &SimConfig,
    model: &NoiseModel,
    extraction_batch: usize,
    master: u64,
) -> Result<BenchReport> {
    let field = ideal_field(cfg)?;
    let seed = role_seed(master, role::BENCH, 0);
    let t0 = Instant::now();
    let fast = ensemble_otilde(cfg, &field, model, seed)?;
    let scan_reduce_secs = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let slow = ensemble_otilde_sequential(cfg, &field, model, seed)?;
    let sequential_secs = t0.elapsed().as_secs_f64();
    let max_otilde_diff = fast
        .o_tilde
        .iter()
        .zip(&slow.o_tilde)
        .map(|(a, b)| a.distance(b))
        .fold(0.0, f64::max);
    let set = ExpectationSet::from_operators(&fast.u_ctrl_final, &fast.o_tilde)?;
    let items = vec![(set, fast.u_ctrl_final); extraction_batch];
    let t0 = Instant::now();
    extract_batch(&items)?;
    let extraction_secs = t0.elapsed().as_secs_f64();
    Ok(BenchReport {
        num_steps: cfg.grid.num_steps,
        realisations: cfg.realisations,
        threads: rayon::current_num_threads(),
        scan_reduce_secs,
        sequential_secs,
        speedup: sequential_secs / scan_reduce_secs,
        max_otilde_diff,
        extraction_batch,
        extraction_secs,
    })
}
