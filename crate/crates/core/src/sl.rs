//! Supervised pulse designer: greedy one-step labels and a classifier.

use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, SlSettings};
use crate::dynamics::{
    fidelity, propagate, BathParams, ControlAction, DensityMatrix, EvolutionState, IntervalSettings, NUM_ACTIONS,
};
use crate::encoding::{Case, FeatureVector, POVM_CONVENTION};
use crate::env::{EnvSpec, PreparationEnv};
use crate::error::{Error, Result};
use crate::neural::{argmax, Checkpoint, CheckpointMetadata, Head, Mlp, Optimizer};
use crate::taskset::TaskSet;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub s: FeatureVector,
    pub label: usize,
    pub fidelity_before: f64,
    pub fidelity_after: f64,
    pub task_id: usize,
    pub bath: BathParams,
}

/// Fidelity after one interval of every action, from the same snapshot.
fn lookahead(
    state: &EvolutionState,
    target: &DensityMatrix,
    bath: &BathParams,
    interval: &IntervalSettings,
) -> Result<Vec<(EvolutionState, f64)>> {
    ControlAction::all()
        .map(|action| {
            let next = propagate(state, action, bath, interval)?;
            let f = fidelity(&next.rho, target)?;
            Ok((next, f))
        })
        .collect()
}

/// Best immediate action (lowest index on ties) and the full fidelity table.
pub fn greedy_label_step(
    state: &EvolutionState,
    target: &DensityMatrix,
    bath: &BathParams,
    interval: &IntervalSettings,
) -> Result<(ControlAction, [f64; NUM_ACTIONS])> {
    let branches = lookahead(state, target, bath, interval)?;
    let mut table = [0.0; NUM_ACTIONS];
    for (slot, (_, f)) in table.iter_mut().zip(&branches) {
        *slot = *f;
    }
    Ok((ControlAction::from_index(argmax(&table))?, table))
}

/// Every step of a greedy rollout, before filtering.
pub fn greedy_rollout(
    env_spec: EnvSpec,
    initial: DensityMatrix,
    target: DensityMatrix,
    bath: BathParams,
    max_steps: usize,
    threshold: f64,
    task_id: usize,
) -> Result<Vec<LabeledExample>> {
    let mut env = PreparationEnv::new(env_spec, initial, target, bath);
    let mut current = env.fidelity()?;
    let mut examples = Vec::with_capacity(max_steps);
    while examples.len() < max_steps && current < threshold {
        let mut branches = lookahead(env.state(), &target, &bath, &env_spec.interval)?;
        let fidelities: Vec<f64> = branches.iter().map(|b| b.1).collect();
        let best = argmax(&fidelities);
        examples.push(LabeledExample {
            s: env.features(),
            label: best,
            fidelity_before: current,
            fidelity_after: fidelities[best],
            task_id,
            bath,
        });
        let (next, f) = branches.swap_remove(best);
        env.set_state(next);
        current = f;
    }
    Ok(examples)
}

/// Keeps only steps that strictly improved on the step before them.
pub fn filter_improving(examples: Vec<LabeledExample>) -> Vec<LabeledExample> {
    examples
        .into_iter()
        .filter(|e| e.fidelity_after > e.fidelity_before)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub case: Case,
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    /// Examples generated before filtering.
    pub generated: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let width = self.case.feature_width();
        let mut header: Vec<String> = (0..width).map(|i| format!("f{i}")).collect();
        header.extend(
            [
                "label",
                "fidelity_before",
                "fidelity_after",
                "task_id",
                "Gamma",
                "gamma",
                "T",
                "split",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        wtr.write_record(&header)?;
        for (split, rows) in [("train", &self.train), ("validation", &self.validation)] {
            for e in rows {
                let mut record: Vec<String> = e.s.iter().map(|v| v.to_string()).collect();
                record.push(e.label.to_string());
                record.push(e.fidelity_before.to_string());
                record.push(e.fidelity_after.to_string());
                record.push(e.task_id.to_string());
                record.push(e.bath.coupling_strength.to_string());
                record.push(e.bath.char_frequency.to_string());
                record.push(e.bath.temperature.to_string());
                record.push(split.to_string());
                wtr.write_record(&record)?;
            }
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Format {
            path: path.into(),
            message: e.to_string(),
        })?;
        crate::io::write_bytes(path, &bytes)
    }
}

/// Greedy-labels every training task in every bath, filters, shuffles and
/// splits into train and validation parts.
pub fn generate_dataset(settings: &SlSettings, tasks: &TaskSet, task_ids: &[usize]) -> Result<Dataset> {
    if task_ids.is_empty() {
        return Err(Error::EmptyDataset("no tasks to label".into()));
    }
    let h = &settings.hyper;
    let spec = EnvSpec {
        case: settings.case,
        scaling: settings.feature_scaling,
        interval: settings.dynamics.interval(h.action_duration),
    };
    let baths = settings.baths.points();
    let jobs: Vec<_> = tasks
        .tasks_for(task_ids)?
        .into_iter()
        .flat_map(|t| baths.iter().map(move |b| (t, *b)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|(task, bath)| {
            greedy_rollout(
                spec,
                tasks.initial_state(task),
                tasks.target_state(task),
                *bath,
                h.max_steps,
                h.fidelity_threshold,
                task.id,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<LabeledExample> = per_job.into_iter().flatten().collect();
    let generated = all.len();
    let mut kept = filter_improving(all);
    log::info!(
        "case {} sl dataset: kept {} of {generated} greedy steps",
        settings.case,
        kept.len()
    );
    if kept.is_empty() {
        return Err(Error::EmptyDataset("no greedy step improved fidelity".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seeds.training);
    kept.shuffle(&mut rng);
    let n_train = ((1.0 - h.validation_fraction) * kept.len() as f64).floor() as usize;
    let validation = kept.split_off(n_train);
    Ok(Dataset {
        case: settings.case,
        train: kept,
        validation,
        generated,
    })
}

/// One line of the learning-curve file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlCurveRow {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch.
    pub train_loss: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
}

pub struct SlOutcome {
    /// Network with the lowest validation loss.
    pub checkpoint: Checkpoint,
    pub final_network: Mlp,
    pub curve: Vec<SlCurveRow>,
}

fn stack(examples: &[&LabeledExample], width: usize) -> (Array2<f64>, Vec<usize>) {
    let mut inputs = Array2::zeros((examples.len(), width));
    for (mut row, e) in inputs.rows_mut().into_iter().zip(examples) {
        row.assign(&ndarray::ArrayView1::from(&e.s[..]));
    }
    (inputs, examples.iter().map(|e| e.label).collect())
}

/// Mean NLL and accuracy of `net` on `examples`.
pub fn score(net: &Mlp, examples: &[LabeledExample]) -> Result<(f64, f64)> {
    if examples.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let refs: Vec<&LabeledExample> = examples.iter().collect();
    let (inputs, labels) = stack(&refs, net.input_width());
    let out = net.forward_batch(inputs.view())?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (row, &y) in out.rows().into_iter().zip(&labels) {
        loss -= row[y];
        let row = row.to_vec();
        if argmax(&row) == y {
            correct += 1;
        }
    }
    let n = examples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mini-batch NLL training; keeps the network with the lowest validation loss.
pub fn train_classifier(settings: &SlSettings, dataset: &Dataset) -> Result<SlOutcome> {
    settings.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::EmptyDataset("training part is empty".into()));
    }
    if dataset.case != settings.case {
        return Err(Error::Config(format!(
            "dataset is for case {}, settings for case {}",
            dataset.case, settings.case
        )));
    }
    let h = &settings.hyper;
    let mut sizes = vec![settings.case.feature_width()];
    sizes.extend(&h.hidden_layers);
    sizes.push(NUM_ACTIONS);
    let mut net = Mlp::init(&sizes, Head::LogSoftmax, settings.seeds.init)?;
    let mut optimizer = Optimizer::new(settings.optimizer, h.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seeds.training.wrapping_add(1));
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    let width = net.input_width();

    let mut curve = Vec::with_capacity(h.epochs);
    let mut best: Option<(f64, usize, Mlp)> = None;
    for epoch in 1..=h.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(h.batch_size) {
            let batch: Vec<&LabeledExample> = chunk.iter().map(|&i| &dataset.train[i]).collect();
            let (inputs, labels) = stack(&batch, width);
            let (loss, grads) = net.nll_loss_and_gradient(inputs.view(), &labels)?;
            loss_sum += loss * chunk.len() as f64;
            optimizer.step(&mut net, &grads)?;
        }
        let train_loss = loss_sum / order.len() as f64;
        let (validation_loss, validation_accuracy) = score(&net, &dataset.validation)?;
        if epoch % 50 == 0 || epoch == 1 {
            log::info!(
                "case {} sl epoch {epoch}: train loss {train_loss:.4}, validation loss {validation_loss:.4} acc {validation_accuracy:.3}",
                settings.case
            );
        }
        curve.push(SlCurveRow {
            epoch,
            train_loss,
            validation_loss,
            validation_accuracy,
        });
        // Without a validation part the training loss decides.
        let criterion = if validation_loss.is_nan() {
            train_loss
        } else {
            validation_loss
        };
        if best.as_ref().is_none_or(|(b, _, _)| criterion < *b) {
            best = Some((criterion, epoch, net.clone()));
        }
    }

    let (score, epoch, best_net) = best.expect("at least one epoch");
    let metadata = CheckpointMetadata {
        algorithm: Algorithm::Sl,
        seed: settings.seeds.init,
        seeds: settings.seeds,
        epoch,
        bath_grid_hash: settings.baths.grid_hash(),
        training_baths: settings.baths.points(),
        povm_convention: POVM_CONVENTION.into(),
        feature_scaling: settings.feature_scaling,
        optimizer: settings.optimizer,
        learning_rate: h.learning_rate,
        reward: None,
        interval: settings.dynamics.interval(h.action_duration),
        max_steps: h.max_steps,
        fidelity_threshold: h.fidelity_threshold,
        validation_score: score,
        config_hash: settings.config_hash(),
    };
    Ok(SlOutcome {
        checkpoint: Checkpoint::new(&best_net, settings.case, metadata),
        final_network: net,
        curve,
    })
}

/// Dataset generation followed by classifier training.
pub fn run_pipeline(settings: &SlSettings, tasks: &TaskSet) -> Result<(Dataset, SlOutcome)> {
    settings.validate()?;
    let dataset = generate_dataset(settings, tasks, &tasks.split.train)?;
    let outcome = train_classifier(settings, &dataset)?;
    Ok((dataset, outcome))
}
