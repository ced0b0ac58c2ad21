use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::noisegen::{
    synthesize, NoiseFamily, NoiseModel, NoiseType, DEFAULT_BUMP_HEIGHT, DEFAULT_BUMP_WIDTH_BINS,
};
use crate::pulsegen::{cpmg_ideal, gaussian_train};
use crate::qfs::{qfs_from_evolution, QfsPoint};
use crate::qsim::{ensemble_in_frame, ControlFrame, SimConfig};
use crate::rng::{derive_seed, domain, stream_rng, StreamId};
use crate::{Error, Result};

/// Closed sampling intervals for the randomised noise parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRanges {
    pub exponent: (f64, f64),
    pub peak_bin: (f64, f64),
    pub division_factor: (f64, f64),
    /// Envelope peak as a fraction of `T`.
    pub envelope_peak: (f64, f64),
}

impl Default for DatasetRanges {
    fn default() -> Self {
        Self {
            exponent: (0.7, 1.3),
            peak_bin: (0.0, 256.0),
            division_factor: (2.0, 16.0),
            envelope_peak: (0.1, 0.9),
        }
    }
}

impl DatasetRanges {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, (lo, hi): (f64, f64), min: f64, max: f64| {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= min && hi <= max) {
                return Err(Error::InvalidParameter(format!(
                    "{name} range [{lo}, {hi}] must be ordered and within [{min}, {max}]"
                )));
            }
            Ok(())
        };
        check("exponent", self.exponent, f64::MIN, f64::MAX)?;
        check("peak bin", self.peak_bin, 0.0, f64::MAX)?;
        check("division factor", self.division_factor, f64::MIN_POSITIVE, f64::MAX)?;
        if !(self.envelope_peak.0 > 0.0 && self.envelope_peak.1 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "envelope peak range {:?} must lie inside (0, 1)",
                self.envelope_peak
            )));
        }
        check("envelope peak", self.envelope_peak, 0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub point: QfsPoint,
    pub noise_type: NoiseType,
    pub stationary: bool,
    pub model: NoiseModel,
}

fn draw(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Class and stationarity of record `i` in a balanced set of `count`.
///
/// Records are laid out in six equal blocks: each noise type in turn,
/// stationary block first.
pub fn record_class(i: usize, count: usize) -> (NoiseType, bool) {
    let per = count / 6;
    let block = i / per;
    (NoiseType::ALL[block / 2], block % 2 == 0)
}

/// The randomised noise model of record `i`.
pub fn sample_model(ranges: &DatasetRanges, master_seed: u64, i: usize, count: usize) -> NoiseModel {
    let (kind, stationary) = record_class(i, count);
    let mut rng = stream_rng(master_seed, domain::DATASET, i as u64);
    let family = match kind {
        NoiseType::OneOverF => NoiseFamily::OneOverF {
            exponent: draw(&mut rng, ranges.exponent),
        },
        NoiseType::OneOverFBump => NoiseFamily::OneOverFBump {
            exponent: draw(&mut rng, ranges.exponent),
            peak_bin: draw(&mut rng, ranges.peak_bin),
            bump_width_bins: DEFAULT_BUMP_WIDTH_BINS,
            bump_height: DEFAULT_BUMP_HEIGHT,
        },
        NoiseType::Colored => NoiseFamily::ColoredGaussian {
            division_factor: draw(&mut rng, ranges.division_factor),
        },
    };
    let mut model = NoiseModel::new(family);
    if !stationary {
        model = model.non_stationary(draw(&mut rng, ranges.envelope_peak));
    }
    model
}

/// A balanced labelled dataset: `count/6` records per (noise type,
/// stationarity) pair, each simulated under the ideal CPMG pulse.
///
/// Record `i` draws its parameters and its noise ensemble from streams
/// derived from `(master_seed, i)`, so the output is independent of the
/// scheduling of the parallel loop.
pub fn generate_dataset(
    cfg: &SimConfig,
    ranges: &DatasetRanges,
    count: usize,
    master_seed: u64,
) -> Result<Vec<DatasetRecord>> {
    ranges.validate()?;
    cfg.validate()?;
    if count == 0 || count % 6 != 0 {
        return Err(Error::InvalidParameter(format!(
            "dataset size {count} must be a positive multiple of 6"
        )));
    }
    if ranges.peak_bin.1 > cfg.grid.nyquist_bin() as f64 {
        return Err(Error::InvalidParameter(format!(
            "peak bin range exceeds the Nyquist bin {}",
            cfg.grid.nyquist_bin()
        )));
    }
    let field = gaussian_train(&cpmg_ideal(&cfg.grid), &cfg.grid)?;
    let frame = ControlFrame::new(cfg, &field)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let model = sample_model(ranges, master_seed, i, count);
            let noise_seed = derive_seed(master_seed, domain::DATASET, i as u64);
            let result = ensemble_in_frame(cfg, &frame, |k| {
                synthesize(&model, &cfg.grid, StreamId::new(noise_seed, k as u64))
            })?;
            let point = qfs_from_evolution(&result)?.with_labels(model.label(), "cpmg-ideal", noise_seed);
            Ok(DatasetRecord {
                point,
                noise_type: model.noise_type(),
                stationary: model.stationary,
                model,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisegen::TimeGrid;

    #[test]
    fn balanced_layout() {
        let mut counts = std::collections::HashMap::new();
        for i in 0..600 {
            *counts.entry(record_class(i, 600)).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 6);
        assert!(counts.values().all(|&c| c == 100));
    }

    #[test]
    fn sampled_parameters_respect_ranges() {
        let ranges = DatasetRanges::default();
        for i in 0..600 {
            let m = sample_model(&ranges, 9, i, 600);
            match m.family {
                NoiseFamily::OneOverF { exponent } => assert!((0.7..=1.3).contains(&exponent)),
                NoiseFamily::OneOverFBump { exponent, peak_bin, .. } => {
                    assert!((0.7..=1.3).contains(&exponent));
                    assert!((0.0..=256.0).contains(&peak_bin));
                }
                NoiseFamily::ColoredGaussian { division_factor } => {
                    assert!((2.0..=16.0).contains(&division_factor))
                }
            }
            if !m.stationary {
                assert!((0.1..=0.9).contains(&m.envelope_peak_fraction));
            }
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let cfg = SimConfig {
            grid: TimeGrid::new(1.0, 64).unwrap(),
            realisations: 2,
            ..SimConfig::default()
        };
        let r = DatasetRanges::default();
        assert!(generate_dataset(&cfg, &r, 7, 0).is_err());
        let bad = DatasetRanges {
            exponent: (1.3, 0.7),
            ..r
        };
        assert!(generate_dataset(&cfg, &bad, 6, 0).is_err());
        // peak range beyond the Nyquist bin of a 64-step grid
        assert!(generate_dataset(&cfg, &r, 6, 0).is_err());
    }

    #[test]
    fn small_dataset_is_deterministic_and_balanced() {
        let cfg = SimConfig {
            grid: TimeGrid::new(1.0, 64).unwrap(),
            realisations: 4,
            ..SimConfig::default()
        };
        let r = DatasetRanges {
            peak_bin: (0.0, 32.0),
            ..DatasetRanges::default()
        };
        let a = generate_dataset(&cfg, &r, 6, 3).unwrap();
        assert_eq!(a, generate_dataset(&cfg, &r, 6, 3).unwrap());
        assert_eq!(a.iter().filter(|d| d.stationary).count(), 3);
        for t in NoiseType::ALL {
            assert_eq!(a.iter().filter(|d| d.noise_type == t).count(), 2);
        }
    }
}
