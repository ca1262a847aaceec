//! State alphabet, preparation tasks, train/validation/test splits and
//! environment grids.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{BathParams, DensityMatrix};
use crate::error::{Error, Result};
use crate::io;

pub const TASKS_SCHEMA_VERSION: u32 = 1;
pub const NUM_STATES: usize = 32;
pub const NUM_TASKS: usize = NUM_STATES * (NUM_STATES - 1);
pub const TRAIN_SIZE: usize = 700;
pub const VALIDATION_SIZE: usize = 50;
pub const TEST_SIZE: usize = 242;
pub const DEFAULT_SHUFFLE_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub theta: f64,
    pub phi_az: f64,
}

impl BlochState {
    /// `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>` as a projector.
    pub fn density_matrix(&self) -> DensityMatrix {
        let a = Complex64::new((self.theta / 2.0).cos(), 0.0);
        let b = Complex64::from_polar((self.theta / 2.0).sin(), self.phi_az);
        DensityMatrix::pure(a, b)
    }

    pub fn bloch_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        [st * self.phi_az.cos(), st * self.phi_az.sin(), ct]
    }
}

/// Poles plus three rings of ten at polar angles pi/4, pi/2, 3pi/4.
pub fn sample_bloch_states() -> Vec<BlochState> {
    let mut states = vec![
        BlochState {
            theta: 0.0,
            phi_az: 0.0,
        },
        BlochState { theta: PI, phi_az: 0.0 },
    ];
    for theta in [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
        for k in 0..10 {
            states.push(BlochState {
                theta,
                phi_az: 2.0 * PI * k as f64 / 10.0,
            });
        }
    }
    states
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparationTask {
    pub id: usize,
    pub ini_index: usize,
    pub tar_index: usize,
}

/// All ordered pairs of distinct states, ids in lexicographic `(ini, tar)` order.
pub fn enumerate_tasks(states: &[BlochState]) -> Result<Vec<PreparationTask>> {
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            let (va, vb) = (a.bloch_vector(), b.bloch_vector());
            let dist = va.iter().zip(vb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            if dist <= 1e-6 {
                return Err(Error::InvalidTaskSet(format!("duplicate state at index {i}")));
            }
        }
    }
    let n = states.len();
    let mut tasks = Vec::with_capacity(n * n.saturating_sub(1));
    for ini in 0..n {
        for tar in (0..n).filter(|&t| t != ini) {
            tasks.push(PreparationTask {
                id: tasks.len(),
                ini_index: ini,
                tar_index: tar,
            });
        }
    }
    Ok(tasks)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded Fisher-Yates shuffle, then 700 / 50 / 242.
pub fn split_tasks(tasks: &[PreparationTask], seed: u64) -> Result<TaskSplit> {
    if tasks.len() != NUM_TASKS {
        return Err(Error::InvalidTaskSet(format!(
            "expected {NUM_TASKS} tasks, got {}",
            tasks.len()
        )));
    }
    let mut ids: Vec<usize> = tasks.iter().map(|t| t.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let test = ids.split_off(TRAIN_SIZE + VALIDATION_SIZE);
    let validation = ids.split_off(TRAIN_SIZE);
    Ok(TaskSplit {
        train: ids,
        validation,
        test,
    })
}

/// The on-disk task file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub schema_version: u32,
    pub shuffle_seed: u64,
    pub states: Vec<BlochState>,
    pub tasks: Vec<PreparationTask>,
    pub split: TaskSplit,
}

impl TaskSet {
    pub fn generate(shuffle_seed: u64) -> Result<Self> {
        let states = sample_bloch_states();
        let tasks = enumerate_tasks(&states)?;
        let split = split_tasks(&tasks, shuffle_seed)?;
        Ok(Self {
            schema_version: TASKS_SCHEMA_VERSION,
            shuffle_seed,
            states,
            tasks,
            split,
        })
    }

    pub fn task(&self, id: usize) -> Result<&PreparationTask> {
        self.tasks
            .get(id)
            .filter(|t| t.id == id)
            .ok_or_else(|| Error::InvalidTaskSet(format!("unknown task id {id}")))
    }

    pub fn initial_state(&self, task: &PreparationTask) -> DensityMatrix {
        self.states[task.ini_index].density_matrix()
    }

    pub fn target_state(&self, task: &PreparationTask) -> DensityMatrix {
        self.states[task.tar_index].density_matrix()
    }

    pub fn tasks_for(&self, ids: &[usize]) -> Result<Vec<PreparationTask>> {
        ids.iter().map(|&id| self.task(id).copied()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != TASKS_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                expected: TASKS_SCHEMA_VERSION,
            });
        }
        let n = self.states.len();
        for (i, t) in self.tasks.iter().enumerate() {
            if t.id != i || t.ini_index >= n || t.tar_index >= n || t.ini_index == t.tar_index {
                return Err(Error::InvalidTaskSet(format!("malformed task entry {i}")));
            }
        }
        let mut seen = vec![false; self.tasks.len()];
        let all = self
            .split
            .train
            .iter()
            .chain(&self.split.validation)
            .chain(&self.split.test);
        for &id in all {
            match seen.get_mut(id) {
                Some(s) if !*s => *s = true,
                _ => return Err(Error::InvalidTaskSet(format!("split repeats or misses id {id}"))),
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidTaskSet("split does not cover every task".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let set: TaskSet = io::read_json(path)?;
        set.validate()?;
        Ok(set)
    }
}

/// Axis values for the Case-3 training grid plus held-out points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "Gamma")]
    pub coupling_strength: Vec<f64>,
    #[serde(rename = "gamma")]
    pub char_frequency: Vec<f64>,
    #[serde(rename = "T")]
    pub temperature: Vec<f64>,
    #[serde(default)]
    pub held_out: Vec<BathParams>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            coupling_strength: vec![0.0, 0.01, 0.1, 0.2, 0.4],
            char_frequency: vec![2.0, 4.0, 8.0],
            temperature: vec![5.0, 10.0, 20.0],
            held_out: vec![BathParams {
                coupling_strength: 0.05,
                char_frequency: 4.0,
                temperature: 10.0,
            }],
        }
    }
}

/// The on-disk environment grid file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentGrid {
    pub training: Vec<BathParams>,
    pub held_out: Vec<BathParams>,
}

fn same_bath(a: &BathParams, b: &BathParams) -> bool {
    (a.coupling_strength - b.coupling_strength).abs() < 1e-12
        && (a.char_frequency - b.char_frequency).abs() < 1e-12
        && (a.temperature - b.temperature).abs() < 1e-12
}

impl EnvironmentGrid {
    pub fn contains_training(&self, bath: &BathParams) -> bool {
        self.training.iter().any(|b| same_bath(b, bath))
    }

    pub fn validate(&self) -> Result<()> {
        for b in self.training.iter().chain(&self.held_out) {
            b.validate()?;
        }
        if let Some(b) = self.held_out.iter().find(|h| self.contains_training(h)) {
            return Err(Error::InvalidGrid(format!(
                "held-out point {b} is also a training point"
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let grid: EnvironmentGrid = io::read_json(path)?;
        grid.validate()?;
        Ok(grid)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        io::json_hash(self)
    }
}

/// Cartesian product of the configured axes, in `Gamma`-major order.
pub fn environment_grid(spec: &GridSpec) -> Result<EnvironmentGrid> {
    if spec.coupling_strength.is_empty() || spec.char_frequency.is_empty() || spec.temperature.is_empty() {
        return Err(Error::InvalidGrid("every axis needs at least one value".into()));
    }
    let mut training = Vec::new();
    for &g in &spec.coupling_strength {
        for &w in &spec.char_frequency {
            for &t in &spec.temperature {
                training.push(BathParams::new(g, w, t)?);
            }
        }
    }
    let grid = EnvironmentGrid {
        training,
        held_out: spec.held_out.clone(),
    };
    grid.validate()?;
    Ok(grid)
}
