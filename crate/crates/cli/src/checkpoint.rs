//! Trained state as one JSON document: the resolved run config and its
//! hash, the class generators, the frozen reference models and the binning
//! fitted on the training split. Floats round-trip exactly.

use std::path::Path;

use qcfd_core::eval::ReferenceModels;
use qcfd_core::gan::{ClassGenerators, LossWeights, TrainConfig, TrainOutcome};
use qcfd_core::info::{BinningSpec, CfdStats};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{io, CliError, Result};

pub const FORMAT: &str = "qcfd-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub config_hash: String,
    pub config: RunConfig,
    /// Training settings actually used, after ablation and grid search.
    pub train: TrainConfig,
    pub weights: LossWeights,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    /// Normal beats in the held-out test split.
    pub test_per_class: usize,
    pub real_cfd: CfdStats,
    pub binning: BinningSpec,
    pub reference: ReferenceModels,
    pub generators: ClassGenerators,
}

impl Checkpoint {
    pub fn new(config: &RunConfig, train: TrainConfig, outcome: &TrainOutcome) -> Self {
        Self {
            format: FORMAT.into(),
            config_hash: config.hash(),
            config: config.clone(),
            train,
            weights: train.weights,
            best_epoch: outcome.best_epoch,
            stopped_early: outcome.stopped_early,
            test_per_class: 0,
            real_cfd: outcome.real_cfd,
            binning: outcome.binning.clone(),
            reference: outcome.reference.clone(),
            generators: outcome.generators.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| CliError::data(path, e.to_string()))?;
        std::fs::write(path, text).map_err(io(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        let c: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| CliError::data(path, format!("bad checkpoint: {e}")))?;
        if c.format != FORMAT {
            return Err(CliError::data(
                path,
                format!("unsupported checkpoint format '{}'", c.format),
            ));
        }
        if c.config.hash() != c.config_hash {
            return Err(CliError::data(
                path,
                "config hash does not match the embedded config",
            ));
        }
        Ok(c)
    }
}
