//! Deep Q-learning pulse designer.
//!
//! Conventions worth knowing before reading the loop:
//! - `epsilon` is the probability of *exploiting* (taking the argmax action);
//!   it grows from 0 toward its cap while training and is 1 at evaluation.
//! - One epoch is one episode on a randomly drawn training task.
//! - The target network is refreshed every `replace_period` learn steps.

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, DrlSettings, EpsilonCadence, RewardConfig, RewardKind};
use crate::dynamics::{BathParams, ControlAction, NUM_ACTIONS};
use crate::encoding::{FeatureVector, POVM_CONVENTION};
use crate::env::{EnvSpec, PreparationEnv};
use crate::error::{Error, Result};
use crate::neural::{argmax, Checkpoint, CheckpointMetadata, Head, Mlp, Optimizer};
use crate::rollout::{design_trajectory, DesignLimits, Policy};
use crate::taskset::{PreparationTask, TaskSet};

#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub s: FeatureVector,
    pub a: usize,
    pub r: f64,
    pub s_next: FeatureVector,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer; the oldest experience is overwritten first.
#[derive(Clone, Debug)]
pub struct ReplayMemory {
    capacity: usize,
    storage: Vec<Experience>,
    cursor: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            storage: Vec::with_capacity(capacity.min(4096)),
            cursor: 0,
        }
    }

    pub fn push(&mut self, experience: Experience) {
        if self.storage.len() < self.capacity {
            self.storage.push(experience);
        } else {
            self.storage[self.cursor] = experience;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.storage.iter()
    }

    /// `n` distinct experiences drawn uniformly.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<&Experience> {
        index::sample(rng, self.storage.len(), n)
            .into_iter()
            .map(|i| &self.storage[i])
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    current: f64,
    increment: f64,
    cap: f64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, increment: f64, cap: f64) -> Self {
        Self {
            current: start.min(cap),
            increment,
            cap,
        }
    }

    pub fn value(&self) -> f64 {
        self.current
    }

    pub fn advance(&mut self) {
        self.current = (self.current + self.increment).min(self.cap);
    }
}

/// With probability `epsilon` the argmax action (lowest index on ties),
/// otherwise a uniformly random one.
pub fn select_action<R: Rng>(net: &Mlp, s: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    let exploit = rng.gen::<f64>() < epsilon;
    let explore_pick = rng.gen_range(0..NUM_ACTIONS);
    if exploit {
        Ok(argmax(&net.forward(s)?))
    } else {
        Ok(explore_pick)
    }
}

pub fn compute_reward(fidelity: f64, reached_threshold: bool, config: &RewardConfig) -> f64 {
    match config.kind {
        RewardKind::FidelityWithSuccessBonus => {
            if reached_threshold {
                config.success_reward
            } else {
                fidelity
            }
        }
    }
}

/// `sum_t discount^(t-1) r_t`.
pub fn discounted_return(rewards: &[f64], discount: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + discount * acc)
}

/// Targets `r` for terminal transitions, `r + discount * max_a' Q_target(s', a')` otherwise.
pub fn td_targets(target: &Mlp, batch: &[&Experience], discount: f64) -> Result<Vec<f64>> {
    let width = target.input_width();
    let mut next = Array2::zeros((batch.len(), width));
    for (mut row, e) in next.rows_mut().into_iter().zip(batch) {
        if e.s_next.len() != width {
            return Err(Error::Shape(format!(
                "next-state width {} vs network {width}",
                e.s_next.len()
            )));
        }
        row.assign(&ndarray::ArrayView1::from(&e.s_next[..]));
    }
    let q_next = target.forward_batch(next.view())?;
    Ok(batch
        .iter()
        .zip(q_next.rows())
        .map(|(e, q)| {
            if e.terminal {
                e.r
            } else {
                e.r + discount * q.fold(f64::NEG_INFINITY, |m, &x| m.max(x))
            }
        })
        .collect())
}

/// One mini-batch update of `main`; `None` when memory is still warming up.
pub fn learn_step<R: Rng>(
    main: &mut Mlp,
    target: &Mlp,
    memory: &ReplayMemory,
    batch_size: usize,
    discount: f64,
    optimizer: &mut Optimizer,
    rng: &mut R,
) -> Result<Option<f64>> {
    if memory.len() < batch_size {
        log::debug!(
            "replay memory holds {} < {batch_size} experiences; skipping update",
            memory.len()
        );
        return Ok(None);
    }
    let batch = memory.sample(batch_size, rng);
    let targets = td_targets(target, &batch, discount)?;
    let width = main.input_width();
    let mut inputs = Array2::zeros((batch.len(), width));
    for (mut row, e) in inputs.rows_mut().into_iter().zip(&batch) {
        row.assign(&ndarray::ArrayView1::from(&e.s[..]));
    }
    let actions: Vec<usize> = batch.iter().map(|e| e.a).collect();
    let (loss, grads) = main.dqn_loss_and_gradient(inputs.view(), &actions, &targets)?;
    optimizer.step(main, &grads)?;
    Ok(Some(loss))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub cumulative_reward: f64,
    pub best_fidelity: f64,
    pub steps: usize,
    pub succeeded: bool,
    pub losses: Vec<f64>,
}

/// Main and target networks, replay memory and exploration state of one run.
pub struct DqnAgent {
    pub main: Mlp,
    pub target: Mlp,
    pub memory: ReplayMemory,
    pub schedule: EpsilonSchedule,
    optimizer: Optimizer,
    learn_steps: usize,
    target_syncs: usize,
    settings: DrlSettings,
    rng: ChaCha8Rng,
}

impl DqnAgent {
    pub fn new(settings: DrlSettings) -> Result<Self> {
        settings.validate()?;
        let mut sizes = vec![settings.case.feature_width()];
        sizes.extend(&settings.hyper.hidden_layers);
        sizes.push(NUM_ACTIONS);
        let main = Mlp::init(&sizes, Head::QValues, settings.seeds.init)?;
        let target = main.clone();
        let h = &settings.hyper;
        Ok(Self {
            main,
            target,
            memory: ReplayMemory::new(h.memory_size),
            schedule: EpsilonSchedule::new(0.0, h.epsilon_increment, h.epsilon_max),
            optimizer: Optimizer::new(settings.optimizer, h.learning_rate),
            learn_steps: 0,
            target_syncs: 0,
            rng: ChaCha8Rng::seed_from_u64(settings.seeds.training),
            settings,
        })
    }

    pub fn settings(&self) -> &DrlSettings {
        &self.settings
    }

    pub fn learn_steps(&self) -> usize {
        self.learn_steps
    }

    pub fn target_syncs(&self) -> usize {
        self.target_syncs
    }

    pub fn env_spec(&self) -> EnvSpec {
        EnvSpec {
            case: self.settings.case,
            scaling: self.settings.feature_scaling,
            interval: self.settings.dynamics.interval(self.settings.hyper.action_duration),
        }
    }

    pub fn limits(&self) -> DesignLimits {
        DesignLimits {
            max_steps: self.settings.hyper.max_steps,
            fidelity_threshold: self.settings.hyper.fidelity_threshold,
        }
    }

    fn learn(&mut self) -> Result<Option<f64>> {
        let h = &self.settings.hyper;
        let loss = learn_step(
            &mut self.main,
            &self.target,
            &self.memory,
            h.batch_size,
            h.discount,
            &mut self.optimizer,
            &mut self.rng,
        )?;
        if loss.is_some() {
            self.learn_steps += 1;
            if self.settings.epsilon_cadence == EpsilonCadence::PerLearnStep {
                self.schedule.advance();
            }
            if self.learn_steps.is_multiple_of(h.replace_period) {
                self.target.copy_from(&self.main)?;
                self.target_syncs += 1;
            }
        }
        Ok(loss)
    }

    /// Plays one training episode, learning after every step.
    pub fn train_episode(
        &mut self,
        task: &PreparationTask,
        tasks: &TaskSet,
        bath: BathParams,
    ) -> Result<EpisodeRecord> {
        let mut env = PreparationEnv::new(
            self.env_spec(),
            tasks.initial_state(task),
            tasks.target_state(task),
            bath,
        );
        let threshold = self.settings.hyper.fidelity_threshold;
        let mut rewards = Vec::with_capacity(self.settings.hyper.max_steps);
        let mut losses = Vec::new();
        let mut best_fidelity = f64::NEG_INFINITY;
        let mut succeeded = false;

        for _ in 0..self.settings.hyper.max_steps {
            let s = env.features();
            let a = select_action(&self.main, &s, self.schedule.value(), &mut self.rng)?;
            let f = env.step(ControlAction::from_index(a)?)?;
            succeeded = f >= threshold;
            let r = compute_reward(f, succeeded, &self.settings.reward);
            rewards.push(r);
            best_fidelity = best_fidelity.max(f);
            self.memory.push(Experience {
                s,
                a,
                r,
                s_next: env.features(),
                terminal: succeeded,
            });
            if let Some(loss) = self.learn()? {
                losses.push(loss);
            }
            if succeeded {
                break;
            }
        }
        if self.settings.epsilon_cadence == EpsilonCadence::PerEpisode && self.learn_steps > 0 {
            self.schedule.advance();
        }
        Ok(EpisodeRecord {
            cumulative_reward: discounted_return(&rewards, self.settings.hyper.discount),
            best_fidelity,
            steps: rewards.len(),
            succeeded,
            losses,
        })
    }

    /// Greedy policy quality on `task_ids` x `baths`: mean best fidelity and
    /// mean discounted return.
    pub fn validate(&self, tasks: &TaskSet, task_ids: &[usize], baths: &[BathParams]) -> Result<(f64, f64)> {
        validate_policy(
            &self.main,
            self.env_spec(),
            self.limits(),
            &self.settings.reward,
            self.settings.hyper.discount,
            tasks,
            task_ids,
            baths,
        )
    }
}

#[allow(clippy::too_many_arguments)]
pub fn validate_policy(
    net: &Mlp,
    env: EnvSpec,
    limits: DesignLimits,
    reward: &RewardConfig,
    discount: f64,
    tasks: &TaskSet,
    task_ids: &[usize],
    baths: &[BathParams],
) -> Result<(f64, f64)> {
    let policy = Policy { net, env, limits };
    let jobs: Vec<(PreparationTask, BathParams)> = tasks
        .tasks_for(task_ids)?
        .into_iter()
        .flat_map(|t| baths.iter().map(move |b| (t, *b)))
        .collect();
    let scores = jobs
        .par_iter()
        .map(|(task, bath)| {
            let tr = design_trajectory(&policy, tasks.initial_state(task), tasks.target_state(task), *bath)?;
            let rewards: Vec<f64> = tr
                .executed_fidelities
                .iter()
                .map(|&f| compute_reward(f, f >= limits.fidelity_threshold, reward))
                .collect();
            Ok((tr.best_fidelity(), discounted_return(&rewards, discount)))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = scores.len() as f64;
    let fid = scores.iter().map(|s| s.0).sum::<f64>() / n;
    let ret = scores.iter().map(|s| s.1).sum::<f64>() / n;
    Ok((fid, ret))
}

/// One line of the learning-curve file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub epoch: usize,
    pub mean_validation_fidelity: f64,
    pub mean_cumulative_reward: f64,
    pub epsilon: f64,
    pub loss_moving_avg: f64,
}

pub struct DrlOutcome {
    /// Network with the best validation fidelity.
    pub checkpoint: Checkpoint,
    pub final_network: Mlp,
    pub curve: Vec<CurveRow>,
}

/// Runs the full training schedule and keeps the best validated network.
pub fn train(settings: DrlSettings, tasks: &TaskSet) -> Result<DrlOutcome> {
    let mut agent = DqnAgent::new(settings)?;
    let settings = agent.settings().clone();
    let h = settings.hyper.clone();
    let train_ids = &tasks.split.train;
    let validation_ids = &tasks.split.validation;
    if train_ids.is_empty() || validation_ids.is_empty() {
        return Err(Error::InvalidTaskSet(
            "training and validation splits must be non-empty".into(),
        ));
    }
    let training_baths = settings.baths.points();
    let validation_baths = settings
        .validation_baths
        .clone()
        .unwrap_or_else(|| training_baths.clone());

    let mut curve = Vec::with_capacity(h.epochs / h.validation_interval);
    let mut window_losses = Vec::new();
    let mut best: Option<(f64, usize, Mlp)> = None;

    for epoch in 1..=h.epochs {
        let task_id = train_ids[agent.rng.gen_range(0..train_ids.len())];
        let bath = training_baths[agent.rng.gen_range(0..training_baths.len())];
        let record = agent.train_episode(tasks.task(task_id)?, tasks, bath)?;
        window_losses.extend(record.losses);

        if epoch % h.validation_interval == 0 {
            let (fid, ret) = agent.validate(tasks, validation_ids, &validation_baths)?;
            let loss_avg = if window_losses.is_empty() {
                f64::NAN
            } else {
                window_losses.iter().sum::<f64>() / window_losses.len() as f64
            };
            window_losses.clear();
            log::info!(
                "case {} drl epoch {epoch}: validation F = {fid:.4}, R = {ret:.3}, eps = {:.3}, loss = {loss_avg:.4}",
                settings.case,
                agent.schedule.value()
            );
            curve.push(CurveRow {
                epoch,
                mean_validation_fidelity: fid,
                mean_cumulative_reward: ret,
                epsilon: agent.schedule.value(),
                loss_moving_avg: loss_avg,
            });
            if best.as_ref().is_none_or(|(score, _, _)| fid > *score) {
                best = Some((fid, epoch, agent.main.clone()));
            }
        }
    }

    let (score, epoch, net) = best.unwrap_or_else(|| (f64::NAN, h.epochs, agent.main.clone()));
    let metadata = CheckpointMetadata {
        algorithm: Algorithm::Drl,
        seed: settings.seeds.init,
        seeds: settings.seeds,
        epoch,
        bath_grid_hash: settings.baths.grid_hash(),
        training_baths,
        povm_convention: POVM_CONVENTION.into(),
        feature_scaling: settings.feature_scaling,
        optimizer: settings.optimizer,
        learning_rate: h.learning_rate,
        reward: Some(settings.reward),
        interval: agent.env_spec().interval,
        max_steps: h.max_steps,
        fidelity_threshold: h.fidelity_threshold,
        validation_score: score,
        config_hash: settings.config_hash(),
    };
    Ok(DrlOutcome {
        checkpoint: Checkpoint::new(&net, settings.case, metadata),
        final_network: agent.main,
        curve,
    })
}
