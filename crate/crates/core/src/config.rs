//! Hyperparameter tables, seeds and resolved training settings.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{BathParams, IntervalSettings};
use crate::encoding::{Case, FeatureScaling};
use crate::error::{Error, Result};
use crate::neural::OptimizerKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Drl,
    Sl,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Drl => "drl",
            Algorithm::Sl => "sl",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub tasks: u64,
    pub init: u64,
    pub training: u64,
    pub rollout: u64,
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Self {
            tasks: seed,
            init: seed,
            training: seed,
            rollout: seed,
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            tasks: 42,
            init: 7,
            training: 1234,
            rollout: 99,
        }
    }
}

const HIDDEN_SMALL: [usize; 3] = [32, 64, 32];
const HIDDEN_LARGE: [usize; 5] = [44, 88, 176, 88, 44];

fn hidden_for(case: Case) -> Vec<usize> {
    match case {
        Case::EnvironmentFeatures => HIDDEN_LARGE.to_vec(),
        _ => HIDDEN_SMALL.to_vec(),
    }
}

/// DQN hyperparameters; defaults are the DRL table column for the case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrlHyperparameters {
    pub total_time: f64,
    pub action_duration: f64,
    pub max_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_layers: Vec<usize>,
    pub fidelity_threshold: f64,
    pub epochs: usize,
    pub memory_size: usize,
    pub replace_period: usize,
    pub discount: f64,
    pub epsilon_increment: f64,
    pub epsilon_max: f64,
    pub epsilon_eval: f64,
    pub validation_interval: usize,
}

impl DrlHyperparameters {
    pub fn table2(case: Case) -> Self {
        Self {
            total_time: 2.0 * PI,
            action_duration: PI / 5.0,
            max_steps: 10,
            batch_size: 32,
            learning_rate: match case {
                Case::EnvironmentFeatures => 0.001,
                _ => 0.002,
            },
            hidden_layers: hidden_for(case),
            fidelity_threshold: 0.999,
            epochs: 10_000,
            memory_size: 20_000,
            replace_period: 200,
            discount: 0.9,
            epsilon_increment: 0.001,
            epsilon_max: 0.95,
            epsilon_eval: 1.0,
            validation_interval: 200,
        }
    }
}

/// Classifier hyperparameters; defaults are the SL table column for the case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlHyperparameters {
    pub total_time: f64,
    pub action_duration: f64,
    pub max_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_layers: Vec<usize>,
    pub fidelity_threshold: f64,
    pub epochs: usize,
    pub validation_fraction: f64,
}

impl SlHyperparameters {
    pub fn table3(case: Case) -> Self {
        Self {
            total_time: 2.0 * PI,
            action_duration: PI / 5.0,
            max_steps: 10,
            batch_size: 16,
            learning_rate: 0.001,
            hidden_layers: hidden_for(case),
            fidelity_threshold: 0.999,
            epochs: 500,
            validation_fraction: 0.2,
        }
    }
}

/// Per-step reward: the fidelity reached, or `success_reward` once the
/// threshold is met.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub kind: RewardKind,
    pub success_reward: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    FidelityWithSuccessBonus,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            kind: RewardKind::FidelityWithSuccessBonus,
            success_reward: 10.0,
        }
    }
}

/// When the exploitation probability advances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonCadence {
    #[default]
    PerLearnStep,
    PerEpisode,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSettings {
    pub zeeman: f64,
    pub substeps: usize,
}

impl Default for DynamicsSettings {
    fn default() -> Self {
        Self {
            zeeman: 1.0,
            substeps: 400,
        }
    }
}

impl DynamicsSettings {
    pub fn interval(&self, action_duration: f64) -> IntervalSettings {
        IntervalSettings {
            zeeman: self.zeeman,
            duration: action_duration,
            substeps: self.substeps,
        }
    }
}

/// Which environments a training run sees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainingBaths {
    /// Case 1: closed-system training.
    Noiseless,
    /// Case 2: one fixed bath.
    Fixed { bath: BathParams },
    /// Case 3: a grid of baths, one drawn per episode.
    Grid {
        training: Vec<BathParams>,
        grid_hash: String,
    },
}

impl TrainingBaths {
    pub fn points(&self) -> Vec<BathParams> {
        match self {
            TrainingBaths::Noiseless => vec![BathParams::noiseless()],
            TrainingBaths::Fixed { bath } => vec![*bath],
            TrainingBaths::Grid { training, .. } => training.clone(),
        }
    }

    pub fn grid_hash(&self) -> Option<String> {
        match self {
            TrainingBaths::Grid { grid_hash, .. } => Some(grid_hash.clone()),
            _ => None,
        }
    }

    pub fn check_case(&self, case: Case) -> Result<()> {
        match (case, self) {
            (Case::NoEnvironment, TrainingBaths::Noiseless)
            | (Case::FixedEnvironment, TrainingBaths::Fixed { .. })
            | (Case::EnvironmentFeatures, TrainingBaths::Grid { .. }) => Ok(()),
            (case, baths) => Err(Error::Config(format!(
                "case {case} cannot train on {}",
                match baths {
                    TrainingBaths::Noiseless => "a noiseless environment",
                    TrainingBaths::Fixed { .. } => "a single fixed bath",
                    TrainingBaths::Grid { .. } => "an environment grid",
                }
            ))),
        }
    }
}

/// Everything a DQN training run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrlSettings {
    pub case: Case,
    pub hyper: DrlHyperparameters,
    pub baths: TrainingBaths,
    /// Environments the periodic validation runs in; defaults to the training ones.
    pub validation_baths: Option<Vec<BathParams>>,
    pub reward: RewardConfig,
    pub epsilon_cadence: EpsilonCadence,
    pub dynamics: DynamicsSettings,
    pub feature_scaling: FeatureScaling,
    pub optimizer: OptimizerKind,
    pub seeds: Seeds,
}

impl DrlSettings {
    pub fn paper_defaults(case: Case, baths: TrainingBaths) -> Self {
        Self {
            case,
            hyper: DrlHyperparameters::table2(case),
            baths,
            validation_baths: None,
            reward: RewardConfig::default(),
            epsilon_cadence: EpsilonCadence::default(),
            dynamics: DynamicsSettings::default(),
            feature_scaling: FeatureScaling::Raw,
            optimizer: OptimizerKind::Sgd,
            seeds: Seeds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.baths.check_case(self.case)?;
        let h = &self.hyper;
        if h.max_steps == 0 || h.batch_size == 0 || h.epochs == 0 || h.memory_size < h.batch_size {
            return Err(Error::Config(
                "DRL step, batch, epoch and memory sizes must be positive, memory >= batch".into(),
            ));
        }
        if h.replace_period == 0 || h.validation_interval == 0 {
            return Err(Error::Config(
                "replace period and validation interval must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&h.discount)
            || !(0.0..=1.0).contains(&h.epsilon_max)
            || !(0.0..=1.0).contains(&h.epsilon_eval)
        {
            return Err(Error::Config("discount and epsilon values must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        crate::io::json_hash(self)
    }
}

/// Everything a supervised pipeline run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlSettings {
    pub case: Case,
    pub hyper: SlHyperparameters,
    pub baths: TrainingBaths,
    pub dynamics: DynamicsSettings,
    pub feature_scaling: FeatureScaling,
    pub optimizer: OptimizerKind,
    pub seeds: Seeds,
}

impl SlSettings {
    pub fn paper_defaults(case: Case, baths: TrainingBaths) -> Self {
        Self {
            case,
            hyper: SlHyperparameters::table3(case),
            baths,
            dynamics: DynamicsSettings::default(),
            feature_scaling: FeatureScaling::Raw,
            optimizer: OptimizerKind::Sgd,
            seeds: Seeds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.baths.check_case(self.case)?;
        let h = &self.hyper;
        if h.max_steps == 0 || h.batch_size == 0 || h.epochs == 0 {
            return Err(Error::Config("SL step, batch and epoch counts must be positive".into()));
        }
        if !(0.0 < h.validation_fraction && h.validation_fraction < 1.0) {
            return Err(Error::Config("validation fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        crate::io::json_hash(self)
    }
}
