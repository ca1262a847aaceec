use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Head, Mlp, OptimizerKind};
use crate::config::{Algorithm, RewardConfig, Seeds};
use crate::dynamics::{BathParams, IntervalSettings};
use crate::encoding::{Case, FeatureScaling};
use crate::error::{Error, Result};
use crate::io;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Provenance and rollout settings stored next to the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetadata {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub seeds: Seeds,
    pub epoch: usize,
    pub bath_grid_hash: Option<String>,
    pub training_baths: Vec<BathParams>,
    pub povm_convention: String,
    pub feature_scaling: FeatureScaling,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub reward: Option<RewardConfig>,
    pub interval: IntervalSettings,
    pub max_steps: usize,
    pub fidelity_threshold: f64,
    pub validation_score: f64,
    pub config_hash: String,
}

/// The checkpoint file: weights row-major per layer, `(out, in)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub head: Head,
    pub case: Case,
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub metadata: CheckpointMetadata,
}

impl Checkpoint {
    pub fn new(net: &Mlp, case: Case, metadata: CheckpointMetadata) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            head: net.head(),
            case,
            layer_sizes: net.layer_sizes().to_vec(),
            weights: net.weights().iter().map(|w| w.iter().copied().collect()).collect(),
            biases: net.biases().iter().map(|b| b.to_vec()).collect(),
            metadata,
        }
    }

    pub fn network(&self) -> Result<Mlp> {
        if self.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                expected: CHECKPOINT_SCHEMA_VERSION,
            });
        }
        if self.layer_sizes.len() < 2 || self.weights.len() != self.layer_sizes.len() - 1 {
            return Err(Error::Shape("checkpoint layer count mismatch".into()));
        }
        let weights = self
            .layer_sizes
            .windows(2)
            .zip(&self.weights)
            .map(|(pair, flat)| {
                Array2::from_shape_vec((pair[1], pair[0]), flat.clone())
                    .map_err(|_| Error::Shape(format!("weights for layer {pair:?} truncated")))
            })
            .collect::<Result<Vec<_>>>()?;
        let biases = self.biases.iter().cloned().map(Array1::from_vec).collect();
        Mlp::from_parts(self.layer_sizes.clone(), weights, biases, self.head)
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    io::write_json(path, checkpoint)
}

/// Loads and validates a checkpoint, returning it with its network.
pub fn load_checkpoint(path: &Path) -> Result<(Checkpoint, Mlp)> {
    let raw: serde_json::Value = io::read_json(path)?;
    let version = raw
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Format {
            path: path.into(),
            message: "missing schema_version".into(),
        })?;
    if version != u64::from(CHECKPOINT_SCHEMA_VERSION) {
        return Err(Error::SchemaVersion {
            found: version as u32,
            expected: CHECKPOINT_SCHEMA_VERSION,
        });
    }
    let checkpoint: Checkpoint = serde_json::from_value(raw).map_err(|e| Error::json(path, e))?;
    let net = checkpoint.network()?;
    Ok((checkpoint, net))
}
