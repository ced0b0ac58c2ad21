//! Versioned TOML run configuration.
//!
//! Every section is optional and falls back to the defaults used throughout
//! the crate. Unknown keys are rejected. The configuration hash is the
//! SHA-256 of the canonical JSON form of the fully defaulted document, so two
//! files that differ only in layout, comments or omitted defaults share a hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{DatasetRanges, LogisticParams, DEFAULT_FOLDS, DEFAULT_K};
use crate::experiments::{
    default_references, default_unknown, LabelledModel, DEFAULT_RATIOS, DEFAULT_SCALES, DEFAULT_WIDTHS,
    IDENTIFICATION_SEQUENCES, REFINE_GRID, REFINE_STAGES,
};
use crate::noisegen::{NoiseModel, TimeGrid};
use crate::pulsegen::{cpmg_ideal, ControlPulseSpec};
use crate::qsim::SimConfig;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Which control pulse a `simulate` run uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseChoice {
    CpmgIdeal,
    /// `sequences` independent draws of pulse errors.
    CpmgRealistic {
        #[serde(default = "one")]
        sequences: usize,
    },
    Custom { spec: ControlPulseSpec },
    /// No control field.
    None,
}

fn one() -> usize {
    1
}

impl Default for PulseChoice {
    fn default() -> Self {
        Self::CpmgIdeal
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentificationSection {
    pub unknown: NoiseModel,
    /// Realistic CPMG sequences forming the unknown cluster.
    pub sequences: usize,
    pub references: Vec<LabelledModel>,
    /// Template whose bump peak is searched over.
    pub refine_template: NoiseModel,
    pub refine_grid: Vec<f64>,
    pub refine_stages: usize,
}

impl Default for IdentificationSection {
    fn default() -> Self {
        Self {
            unknown: default_unknown(),
            sequences: IDENTIFICATION_SEQUENCES,
            references: default_references(),
            refine_template: default_unknown(),
            refine_grid: REFINE_GRID.to_vec(),
            refine_stages: REFINE_STAGES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub count: usize,
    pub ranges: DatasetRanges,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            count: 600,
            ranges: DatasetRanges::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub folds: usize,
    pub knn_k: usize,
    /// 1 trains a single decision tree; larger values a bootstrap forest.
    pub ensemble_size: usize,
    pub logistic: LogisticParams,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            knn_k: DEFAULT_K,
            ensemble_size: 1,
            logistic: LogisticParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub widths: Vec<f64>,
    pub ratios: Vec<f64>,
    pub scales: Vec<f64>,
    /// Models swept over pulse width and energy.
    pub models: Vec<LabelledModel>,
    /// Endpoints of the interpolation study, ratio 0 then ratio 1.
    pub interpolate_from: LabelledModel,
    pub interpolate_to: LabelledModel,
}

impl Default for SweepSection {
    fn default() -> Self {
        let bump = LabelledModel::new(default_unknown());
        let colored = LabelledModel::new(NoiseModel::colored(crate::experiments::REFERENCE_DIVISION_FACTOR));
        Self {
            widths: DEFAULT_WIDTHS.to_vec(),
            ratios: DEFAULT_RATIOS.to_vec(),
            scales: DEFAULT_SCALES.to_vec(),
            models: vec![bump.clone(), colored.clone()],
            interpolate_from: bump,
            interpolate_to: colored,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub model: NoiseModel,
    pub extraction_batch: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            model: default_unknown(),
            extraction_batch: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub pulse: PulseChoice,
    /// Models simulated by `simulate`; an empty list simulates without noise.
    #[serde(default)]
    pub noise: Vec<LabelledModel>,
    #[serde(default)]
    pub identification: IdentificationSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub bench: BenchSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            out_dir: default_out_dir(),
            sim: SimConfig::default(),
            pulse: PulseChoice::default(),
            noise: Vec::new(),
            identification: IdentificationSection::default(),
            dataset: DatasetSection::default(),
            train: TrainSection::default(),
            sweep: SweepSection::default(),
            bench: BenchSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks the parts every command relies on. Command-specific sections
    /// are validated again by the operations that consume them.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.sim.validate().map_err(|e| Error::Config(format!("sim: {e}")))?;
        for (i, n) in self.noise.iter().enumerate() {
            n.model
                .validate(&self.sim.grid)
                .map_err(|e| Error::Config(format!("noise[{i}] ({}): {e}", n.label)))?;
        }
        if let PulseChoice::Custom { spec } = &self.pulse {
            spec.validate(&self.sim.grid).map_err(|e| Error::Config(format!("pulse: {e}")))?;
        }
        if let PulseChoice::CpmgRealistic { sequences: 0 } = self.pulse {
            return Err(Error::Config("pulse: sequences must be at least 1".into()));
        }
        self.dataset
            .ranges
            .validate()
            .map_err(|e| Error::Config(format!("dataset.ranges: {e}")))?;
        Ok(())
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("configuration serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Pulse spec used by `simulate` for the given sequence index, or `None`
    /// for an undriven run.
    pub fn pulse_spec(&self, grid: &TimeGrid, sequence: usize) -> Option<ControlPulseSpec> {
        match &self.pulse {
            PulseChoice::CpmgIdeal => Some(cpmg_ideal(grid)),
            PulseChoice::CpmgRealistic { .. } => Some(crate::experiments::realistic_spec(
                &self.sim,
                crate::experiments::role_seed(self.seed, crate::experiments::role::SIMULATE, 0),
                sequence,
            )),
            PulseChoice::Custom { spec } => Some(spec.clone()),
            PulseChoice::None => None,
        }
    }

    pub fn pulse_sequences(&self) -> usize {
        match self.pulse {
            PulseChoice::CpmgRealistic { sequences } => sequences,
            _ => 1,
        }
    }

    pub fn pulse_label(&self, sequence: usize) -> String {
        match &self.pulse {
            PulseChoice::CpmgIdeal => "cpmg-ideal".into(),
            PulseChoice::CpmgRealistic { .. } => format!("cpmg-realistic-{sequence}"),
            PulseChoice::Custom { .. } => "custom".into(),
            PulseChoice::None => "none".into(),
        }
    }
}
