//! Greedy trajectory design with a trained network, and test-set evaluation.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Algorithm;
use crate::dynamics::{BathParams, ControlAction, DensityMatrix};
use crate::encoding::Case;
use crate::env::{EnvSpec, PreparationEnv};
use crate::error::{Error, Result};
use crate::io;
use crate::neural::{argmax, load_checkpoint, Checkpoint, Mlp};
use crate::taskset::{PreparationTask, TaskSet};

/// Stopping rules of the design loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignLimits {
    pub max_steps: usize,
    pub fidelity_threshold: f64,
}

/// A network plus everything needed to act with it.
#[derive(Clone, Copy, Debug)]
pub struct Policy<'a> {
    pub net: &'a Mlp,
    pub env: EnvSpec,
    pub limits: DesignLimits,
}

impl Policy<'_> {
    pub fn act(&self, features: &[f64]) -> Result<ControlAction> {
        ControlAction::from_index(argmax(&self.net.forward(features)?))
    }
}

/// A loaded checkpoint ready for rollouts.
#[derive(Clone, Debug)]
pub struct Model {
    pub checkpoint: Checkpoint,
    pub net: Mlp,
    /// Hex SHA-256 of the checkpoint file bytes.
    pub file_hash: String,
}

impl Model {
    pub fn load(path: &Path) -> Result<Self> {
        let (checkpoint, net) = load_checkpoint(path)?;
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            checkpoint,
            net,
            file_hash: io::sha256_hex(&bytes),
        })
    }

    pub fn from_checkpoint(checkpoint: Checkpoint) -> Result<Self> {
        let net = checkpoint.network()?;
        let file_hash = io::json_hash(&checkpoint);
        Ok(Self {
            checkpoint,
            net,
            file_hash,
        })
    }

    pub fn case(&self) -> Case {
        self.checkpoint.case
    }

    pub fn algorithm(&self) -> Algorithm {
        self.checkpoint.metadata.algorithm
    }

    pub fn policy(&self) -> Result<Policy<'_>> {
        let meta = &self.checkpoint.metadata;
        if self.net.input_width() != self.case().feature_width() {
            return Err(Error::Shape(format!(
                "case {} expects {} input features, network takes {}",
                self.case(),
                self.case().feature_width(),
                self.net.input_width()
            )));
        }
        Ok(Policy {
            net: &self.net,
            env: EnvSpec {
                case: self.case(),
                scaling: meta.feature_scaling,
                interval: meta.interval,
            },
            limits: DesignLimits {
                max_steps: meta.max_steps,
                fidelity_threshold: meta.fidelity_threshold,
            },
        })
    }

    /// Fails unless the checkpoint was trained for `case`.
    pub fn expect_case(&self, case: Case) -> Result<()> {
        if self.case() != case {
            return Err(Error::CaseMismatch {
                checkpoint: self.case().id(),
                requested: case.id(),
            });
        }
        Ok(())
    }
}

/// The output of one design loop.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Output sequence: everything on success, the best prefix otherwise.
    pub actions: Vec<ControlAction>,
    /// Fidelity after each action of the output sequence.
    pub fidelities: Vec<f64>,
    /// Step (0-based) of maximal fidelity; `None` when no action was needed.
    pub best_index: Option<usize>,
    /// Fidelity after every executed step, including any discarded suffix.
    pub executed_fidelities: Vec<f64>,
    pub initial_fidelity: f64,
    pub design_time: f64,
    pub succeeded: bool,
}

impl Trajectory {
    pub fn best_fidelity(&self) -> f64 {
        self.best_index.map_or(self.initial_fidelity, |i| self.fidelities[i])
    }

    /// Fidelity after the last executed step.
    pub fn final_fidelity(&self) -> f64 {
        self.executed_fidelities
            .last()
            .copied()
            .unwrap_or(self.initial_fidelity)
    }

    pub fn steps(&self) -> usize {
        self.actions.len()
    }
}

/// Runs the greedy design loop from `initial` (zero bath memory) toward `target`.
pub fn design_trajectory(
    policy: &Policy<'_>,
    initial: DensityMatrix,
    target: DensityMatrix,
    bath: BathParams,
) -> Result<Trajectory> {
    let started = Instant::now();
    let mut env = PreparationEnv::new(policy.env, initial, target, bath);
    let threshold = policy.limits.fidelity_threshold;
    let initial_fidelity = env.fidelity()?;
    let mut actions = Vec::with_capacity(policy.limits.max_steps);
    let mut fidelities = Vec::with_capacity(policy.limits.max_steps);
    let mut succeeded = initial_fidelity >= threshold;

    while !succeeded && actions.len() < policy.limits.max_steps {
        let action = policy.act(&env.features())?;
        let f = env.step(action)?;
        actions.push(action);
        fidelities.push(f);
        succeeded = f >= threshold;
    }

    let executed_fidelities = fidelities.clone();
    let best_index = if fidelities.is_empty() {
        None
    } else {
        // First occurrence of the maximum keeps the output sequence shortest.
        Some(
            fidelities
                .iter()
                .enumerate()
                .fold(0, |best, (i, &f)| if f > fidelities[best] { i } else { best }),
        )
    };
    if let (false, Some(best)) = (succeeded, best_index) {
        actions.truncate(best + 1);
        fidelities.truncate(best + 1);
    }
    Ok(Trajectory {
        actions,
        fidelities,
        best_index,
        executed_fidelities,
        initial_fidelity,
        design_time: started.elapsed().as_secs_f64(),
        succeeded,
    })
}

/// One line of the per-task results file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub task_id: usize,
    pub case: u8,
    pub algorithm: Algorithm,
    #[serde(rename = "Gamma")]
    pub coupling_strength: f64,
    #[serde(rename = "gamma")]
    pub char_frequency: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
    pub steps: usize,
    pub best_fidelity: f64,
    pub final_fidelity: f64,
    pub design_time_s: f64,
    pub succeeded: bool,
}

/// Mean with the spread to the extreme values (`max - mean`, `mean - min`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub above: f64,
    pub below: f64,
    pub std: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                above: f64::NAN,
                below: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            above: max - mean,
            below: mean - min,
            std: var.sqrt(),
        }
    }
}

/// Aggregate metrics over a task set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub case: u8,
    pub algorithm: Algorithm,
    pub baths: Vec<BathParams>,
    pub tasks: usize,
    pub fidelity: Spread,
    pub final_fidelity: Spread,
    pub design_time: Spread,
    pub mean_steps: f64,
    pub success_rate: f64,
    pub checkpoint_hash: String,
    pub config_hash: String,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub summary: EvalSummary,
    pub rows: Vec<ResultRow>,
    pub trajectories: Vec<Trajectory>,
}

/// Designs a trajectory for every `(task, bath)` pair.
///
/// Rows come out task-major in the order given. Work is spread over the
/// current rayon pool; each design time is measured inside its worker.
pub fn evaluate(model: &Model, tasks: &TaskSet, task_ids: &[usize], baths: &[BathParams]) -> Result<Evaluation> {
    if task_ids.is_empty() || baths.is_empty() {
        return Err(Error::Config("evaluation needs at least one task and one bath".into()));
    }
    let policy = model.policy()?;
    let jobs: Vec<(PreparationTask, BathParams)> = tasks
        .tasks_for(task_ids)?
        .into_iter()
        .flat_map(|t| baths.iter().map(move |b| (t, *b)))
        .collect();
    let trajectories = jobs
        .par_iter()
        .map(|(task, bath)| design_trajectory(&policy, tasks.initial_state(task), tasks.target_state(task), *bath))
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<ResultRow> = jobs
        .iter()
        .zip(&trajectories)
        .map(|((task, bath), tr)| ResultRow {
            task_id: task.id,
            case: model.case().id(),
            algorithm: model.algorithm(),
            coupling_strength: bath.coupling_strength,
            char_frequency: bath.char_frequency,
            temperature: bath.temperature,
            steps: tr.steps(),
            best_fidelity: tr.best_fidelity(),
            final_fidelity: tr.final_fidelity(),
            design_time_s: tr.design_time,
            succeeded: tr.succeeded,
        })
        .collect();

    let best: Vec<f64> = rows.iter().map(|r| r.best_fidelity).collect();
    let last: Vec<f64> = rows.iter().map(|r| r.final_fidelity).collect();
    let times: Vec<f64> = rows.iter().map(|r| r.design_time_s).collect();
    let n = rows.len() as f64;
    let summary = EvalSummary {
        case: model.case().id(),
        algorithm: model.algorithm(),
        baths: baths.to_vec(),
        tasks: rows.len(),
        fidelity: Spread::of(&best),
        final_fidelity: Spread::of(&last),
        design_time: Spread::of(&times),
        mean_steps: rows.iter().map(|r| r.steps as f64).sum::<f64>() / n,
        success_rate: rows.iter().filter(|r| r.succeeded).count() as f64 / n,
        checkpoint_hash: model.file_hash.clone(),
        config_hash: model.checkpoint.metadata.config_hash.clone(),
    };
    Ok(Evaluation {
        summary,
        rows,
        trajectories,
    })
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    io::write_csv(path, rows)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    io::read_csv(path)
}
