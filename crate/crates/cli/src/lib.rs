//! Experiment configuration and the subcommands of the `qpulse` binary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use qpulse_core::config::{
    Algorithm, DrlHyperparameters, DrlSettings, DynamicsSettings, EpsilonCadence, RewardConfig, Seeds,
    SlHyperparameters, SlSettings, TrainingBaths,
};
use qpulse_core::dynamics::BathParams;
use qpulse_core::encoding::{Case, FeatureScaling};
use qpulse_core::io;
use qpulse_core::neural::{save_checkpoint, Checkpoint, OptimizerKind};
use qpulse_core::rollout::{evaluate, write_results, EvalSummary, Model};
use qpulse_core::taskset::{environment_grid, EnvironmentGrid, GridSpec, TaskSet, DEFAULT_SHUFFLE_SEED};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefaultsProfile {
    /// DQN hyperparameter table.
    Table2,
    /// Classifier hyperparameter table.
    Table3,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    #[default]
    Test,
}

impl Split {
    pub fn ids(self, tasks: &TaskSet) -> &[usize] {
        match self {
            Split::Train => &tasks.split.train,
            Split::Validation => &tasks.split.validation,
            Split::Test => &tasks.split.test,
        }
    }
}

fn table1_bath() -> BathParams {
    BathParams {
        coupling_strength: 0.1,
        char_frequency: 4.0,
        temperature: 10.0,
    }
}

fn default_eval_baths() -> Vec<BathParams> {
    vec![table1_bath()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    #[serde(default)]
    pub split: Split,
    #[serde(default = "default_eval_baths")]
    pub baths: Vec<BathParams>,
    /// Restricts the split to these `(initial, target)` state-index pairs.
    #[serde(default)]
    pub pairs: Option<Vec<(usize, usize)>>,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            split: Split::Test,
            baths: default_eval_baths(),
            pairs: None,
        }
    }
}

impl EvalSpec {
    /// Task ids to evaluate, in split order.
    pub fn task_ids(&self, tasks: &TaskSet) -> anyhow::Result<Vec<usize>> {
        match &self.pairs {
            None => Ok(self.split.ids(tasks).to_vec()),
            Some(pairs) => pairs
                .iter()
                .map(|&(ini, tar)| {
                    tasks
                        .tasks
                        .iter()
                        .find(|t| t.ini_index == ini && t.tar_index == tar)
                        .map(|t| t.id)
                        .ok_or_else(|| anyhow!("no task prepares state {tar} from state {ini}"))
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Gamma,
    #[serde(rename = "gamma")]
    CharFrequency,
    T,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Gamma => "Gamma",
            Axis::CharFrequency => "gamma",
            Axis::T => "T",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    #[serde(rename = "Gamma", default)]
    pub coupling_strength: Vec<f64>,
    #[serde(rename = "gamma", default)]
    pub char_frequency: Vec<f64>,
    #[serde(rename = "T", default)]
    pub temperature: Vec<f64>,
    /// Values of the two parameters held fixed along each axis.
    #[serde(default = "table1_bath")]
    pub center: BathParams,
    #[serde(default)]
    pub split: Split,
    #[serde(default)]
    pub checkpoints: Vec<PathBuf>,
}

impl SweepSpec {
    pub fn points(&self, axis: Axis) -> anyhow::Result<Vec<BathParams>> {
        let c = self.center;
        let values = match axis {
            Axis::Gamma => &self.coupling_strength,
            Axis::CharFrequency => &self.char_frequency,
            Axis::T => &self.temperature,
        };
        ensure!(!values.is_empty(), "sweep axis {} has no values", axis.name());
        values
            .iter()
            .map(|&v| {
                let b = match axis {
                    Axis::Gamma => BathParams::new(v, c.char_frequency, c.temperature),
                    Axis::CharFrequency => BathParams::new(c.coupling_strength, v, c.temperature),
                    Axis::T => BathParams::new(c.coupling_strength, c.char_frequency, v),
                };
                b.map_err(Into::into)
            })
            .collect()
    }
}

/// One experiment, as written by hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "config_schema")]
    pub schema_version: u32,
    pub defaults_profile: DefaultsProfile,
    pub case: Case,
    pub algorithm: Algorithm,
    /// Case-2 training environment.
    #[serde(default)]
    pub bath: Option<BathParams>,
    /// Case-3 environment grid file.
    #[serde(default)]
    pub grid: Option<PathBuf>,
    /// Task file; generated from `seeds.tasks` when absent.
    #[serde(default)]
    pub tasks: Option<PathBuf>,
    #[serde(default)]
    pub seeds: Seeds,
    /// Hyperparameter table entries to replace, by field name.
    #[serde(default)]
    pub overrides: Map<String, Value>,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub feature_scaling: FeatureScaling,
    #[serde(default)]
    pub dynamics: DynamicsSettings,
    #[serde(default)]
    pub epsilon_cadence: EpsilonCadence,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub validation_baths: Option<Vec<BathParams>>,
    #[serde(default)]
    pub grid_spec: Option<GridSpec>,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub evaluation: EvalSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn config_schema() -> u32 {
    CONFIG_SCHEMA_VERSION
}

fn merge_overrides<T: Serialize + for<'de> Deserialize<'de>>(
    table: T,
    overrides: &Map<String, Value>,
) -> anyhow::Result<T> {
    let mut value = serde_json::to_value(table)?;
    let fields = value.as_object_mut().expect("tables serialize to objects");
    for (key, v) in overrides {
        ensure!(fields.contains_key(key), "unknown hyperparameter override {key:?}");
        fields.insert(key.clone(), v.clone());
    }
    serde_json::from_value(value).context("invalid hyperparameter override")
}

impl ExperimentConfig {
    /// Reads a config, resolving relative paths against its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        ensure!(
            config.schema_version == CONFIG_SCHEMA_VERSION,
            "config schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
            config.schema_version
        );
        // Canonical base, so outputs that record resolved paths do not depend on how the config was named.
        let parent = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let base = fs::canonicalize(parent).with_context(|| format!("resolving {}", parent.display()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.grid.as_mut().map(resolve);
        config.tasks.as_mut().map(resolve);
        config.checkpoint.as_mut().map(resolve);
        if let Some(sweep) = config.sweep.as_mut() {
            sweep.checkpoints.iter_mut().for_each(resolve);
        }
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> anyhow::Result<()> {
        match (self.algorithm, self.defaults_profile) {
            (Algorithm::Drl, DefaultsProfile::Table2) | (Algorithm::Sl, DefaultsProfile::Table3) => Ok(()),
            (a, p) => bail!("algorithm {a} cannot use the {p:?} defaults profile"),
        }
    }

    pub fn with_seeds(mut self, seeds: Option<u64>) -> Self {
        if let Some(seed) = seeds {
            self.seeds = Seeds::all(seed);
        }
        self
    }

    /// The environments a training run uses.
    pub fn training_baths(&self) -> anyhow::Result<TrainingBaths> {
        match self.case {
            Case::NoEnvironment => {
                ensure!(
                    self.bath.is_none() && self.grid.is_none(),
                    "case 1 trains without an environment"
                );
                Ok(TrainingBaths::Noiseless)
            }
            Case::FixedEnvironment => {
                ensure!(self.grid.is_none(), "case 2 trains on a single bath, not a grid");
                let bath = self.bath.ok_or_else(|| anyhow!("case 2 needs a `bath`"))?;
                bath.validate()?;
                Ok(TrainingBaths::Fixed { bath })
            }
            Case::EnvironmentFeatures => {
                ensure!(self.bath.is_none(), "case 3 trains on a grid, not a single bath");
                let path = self
                    .grid
                    .as_ref()
                    .ok_or_else(|| anyhow!("case 3 needs a `grid` file"))?;
                let grid = EnvironmentGrid::load(path)?;
                Ok(TrainingBaths::Grid {
                    grid_hash: grid.hash(),
                    training: grid.training,
                })
            }
        }
    }

    pub fn drl_settings(&self) -> anyhow::Result<DrlSettings> {
        ensure!(
            self.algorithm == Algorithm::Drl,
            "config is for the {} pipeline",
            self.algorithm
        );
        let settings = DrlSettings {
            case: self.case,
            hyper: merge_overrides(DrlHyperparameters::table2(self.case), &self.overrides)?,
            baths: self.training_baths()?,
            validation_baths: self.validation_baths.clone(),
            reward: self.reward,
            epsilon_cadence: self.epsilon_cadence,
            dynamics: self.dynamics,
            feature_scaling: self.feature_scaling,
            optimizer: self.optimizer,
            seeds: self.seeds,
        };
        settings.validate()?;
        Ok(settings)
    }

    pub fn sl_settings(&self) -> anyhow::Result<SlSettings> {
        ensure!(
            self.algorithm == Algorithm::Sl,
            "config is for the {} pipeline",
            self.algorithm
        );
        let settings = SlSettings {
            case: self.case,
            hyper: merge_overrides(SlHyperparameters::table3(self.case), &self.overrides)?,
            baths: self.training_baths()?,
            dynamics: self.dynamics,
            feature_scaling: self.feature_scaling,
            optimizer: self.optimizer,
            seeds: self.seeds,
        };
        settings.validate()?;
        Ok(settings)
    }

    pub fn task_set(&self) -> anyhow::Result<TaskSet> {
        match &self.tasks {
            Some(path) => Ok(TaskSet::load(path)?),
            None => Ok(TaskSet::generate(self.seeds.tasks)?),
        }
    }

    pub fn config_hash(&self) -> String {
        io::json_hash(self)
    }
}

/// Fails if any of `paths` exists and `force` is off.
pub fn guard_outputs(paths: &[&Path], force: bool) -> anyhow::Result<()> {
    if force {
        return Ok(());
    }
    if let Some(p) = paths.iter().find(|p| p.exists()) {
        bail!("{} already exists; pass --force to overwrite", p.display());
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskFileInfo {
    pub schema_version: u32,
    pub tasks_file: PathBuf,
    pub grid_file: PathBuf,
    pub tasks_sha256: String,
    pub grid_hash: String,
    pub shuffle_seed: u64,
}

/// Writes `tasks.json` and `grid.json` into `out`.
pub fn cmd_gen_tasks(
    config: Option<&ExperimentConfig>,
    seed: Option<u64>,
    out: &Path,
    force: bool,
) -> anyhow::Result<TaskFileInfo> {
    let shuffle_seed = seed.or(config.map(|c| c.seeds.tasks)).unwrap_or(DEFAULT_SHUFFLE_SEED);
    let grid_spec = config.and_then(|c| c.grid_spec.clone()).unwrap_or_default();
    let tasks_file = out.join("tasks.json");
    let grid_file = out.join("grid.json");
    guard_outputs(&[&tasks_file, &grid_file], force)?;
    if out.exists() && !out.is_dir() {
        bail!("output path {} is not a directory", out.display());
    }

    let tasks = TaskSet::generate(shuffle_seed)?;
    let grid = environment_grid(&grid_spec)?;
    io::write_json(&tasks_file, &tasks)?;
    io::write_json(&grid_file, &grid)?;
    let bytes = fs::read(&tasks_file)?;
    Ok(TaskFileInfo {
        schema_version: OUTPUT_SCHEMA_VERSION,
        tasks_sha256: io::sha256_hex(&bytes),
        grid_hash: grid.hash(),
        tasks_file,
        grid_file,
        shuffle_seed,
    })
}

/// The provenance record written next to every checkpoint.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub settings: Value,
    pub settings_hash: String,
    pub seeds: Seeds,
    pub tasks_shuffle_seed: u64,
    pub checkpoint_sha256: String,
    pub best_epoch: usize,
    pub validation_score: f64,
}

pub struct TrainOutputs {
    pub checkpoint: PathBuf,
    pub curve: PathBuf,
    pub dataset: Option<PathBuf>,
    pub run: PathBuf,
}

impl TrainOutputs {
    pub fn in_dir(out: &Path, algorithm: Algorithm) -> Self {
        Self {
            checkpoint: out.join("checkpoint.json"),
            curve: out.join("curve.csv"),
            dataset: (algorithm == Algorithm::Sl).then(|| out.join("dataset.csv")),
            run: out.join("run.json"),
        }
    }
}

/// Trains one model and writes checkpoint, learning curve and provenance.
pub fn cmd_train(config: &ExperimentConfig, out: &Path, force: bool) -> anyhow::Result<TrainOutputs> {
    let outputs = TrainOutputs::in_dir(out, config.algorithm);
    let mut guarded = vec![
        outputs.checkpoint.as_path(),
        outputs.curve.as_path(),
        outputs.run.as_path(),
    ];
    guarded.extend(outputs.dataset.as_deref());
    guard_outputs(&guarded, force)?;
    let tasks = config.task_set()?;

    let (checkpoint, settings): (Checkpoint, Value) = match config.algorithm {
        Algorithm::Drl => {
            let settings = config.drl_settings()?;
            log::info!(
                "training case {} DQN agent, config {}",
                config.case,
                settings.config_hash()
            );
            let outcome = qpulse_core::drl::train(settings.clone(), &tasks)?;
            io::write_csv(&outputs.curve, &outcome.curve)?;
            (outcome.checkpoint, serde_json::to_value(settings)?)
        }
        Algorithm::Sl => {
            let settings = config.sl_settings()?;
            log::info!(
                "training case {} classifier, config {}",
                config.case,
                settings.config_hash()
            );
            let (dataset, outcome) = qpulse_core::sl::run_pipeline(&settings, &tasks)?;
            if let Some(path) = &outputs.dataset {
                dataset.write_csv(path)?;
            }
            io::write_csv(&outputs.curve, &outcome.curve)?;
            (outcome.checkpoint, serde_json::to_value(settings)?)
        }
    };
    save_checkpoint(&outputs.checkpoint, &checkpoint)?;
    let record = RunRecord {
        schema_version: OUTPUT_SCHEMA_VERSION,
        config: config.clone(),
        config_hash: config.config_hash(),
        settings_hash: checkpoint.metadata.config_hash.clone(),
        settings,
        seeds: config.seeds,
        tasks_shuffle_seed: tasks.shuffle_seed,
        checkpoint_sha256: io::sha256_hex(&fs::read(&outputs.checkpoint)?),
        best_epoch: checkpoint.metadata.epoch,
        validation_score: checkpoint.metadata.validation_score,
    };
    io::write_json(&outputs.run, &record)?;
    Ok(outputs)
}

fn load_model_for(config: &ExperimentConfig, path: &Path) -> anyhow::Result<Model> {
    let model = Model::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    model.expect_case(config.case)?;
    ensure!(
        model.algorithm() == config.algorithm,
        "checkpoint was trained by the {} pipeline, config says {}",
        model.algorithm(),
        config.algorithm
    );
    Ok(model)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryFile {
    pub schema_version: u32,
    pub split: Split,
    pub checkpoint: PathBuf,
    pub config_hash: String,
    pub seeds: Seeds,
    pub summary: EvalSummary,
}

/// Evaluates the configured checkpoint; writes `results.csv` and `summary.json`.
pub fn cmd_eval(
    config: &ExperimentConfig,
    checkpoint: Option<&Path>,
    out: &Path,
    force: bool,
) -> anyhow::Result<SummaryFile> {
    let results = out.join("results.csv");
    let summary_path = out.join("summary.json");
    guard_outputs(&[&results, &summary_path], force)?;
    let path = checkpoint
        .map(Path::to_path_buf)
        .or_else(|| config.checkpoint.clone())
        .ok_or_else(|| anyhow!("eval needs a checkpoint (config `checkpoint` or --checkpoint)"))?;
    let model = load_model_for(config, &path)?;
    let tasks = config.task_set()?;
    let ids = config.evaluation.task_ids(&tasks)?;
    let evaluation = evaluate(&model, &tasks, &ids, &config.evaluation.baths)?;
    write_results(&results, &evaluation.rows)?;
    let file = SummaryFile {
        schema_version: OUTPUT_SCHEMA_VERSION,
        split: config.evaluation.split,
        checkpoint: path,
        config_hash: config.config_hash(),
        seeds: config.seeds,
        summary: evaluation.summary,
    };
    io::write_json(&summary_path, &file)?;
    Ok(file)
}

/// One line of the sweep file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub checkpoint: String,
    pub case: u8,
    pub algorithm: Algorithm,
    pub axis: String,
    #[serde(rename = "Gamma")]
    pub coupling_strength: f64,
    #[serde(rename = "gamma")]
    pub char_frequency: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
    pub seen_in_training: bool,
    pub tasks: usize,
    pub fidelity_mean: f64,
    pub fidelity_above: f64,
    pub fidelity_below: f64,
    pub fidelity_std: f64,
    pub final_fidelity_mean: f64,
    pub design_time_mean: f64,
    pub mean_steps: f64,
    pub success_rate: f64,
    pub checkpoint_hash: String,
    pub config_hash: String,
}

fn seen_in_training(model: &Model, bath: &BathParams) -> bool {
    model.checkpoint.metadata.training_baths.iter().any(|b| {
        (b.coupling_strength - bath.coupling_strength).abs() < 1e-12
            && (b.char_frequency - bath.char_frequency).abs() < 1e-12
            && (b.temperature - bath.temperature).abs() < 1e-12
    })
}

/// Sweeps each checkpoint over the configured axes.
pub fn sweep_rows(
    spec: &SweepSpec,
    checkpoints: &[PathBuf],
    tasks: &TaskSet,
    config_hash: &str,
) -> anyhow::Result<Vec<SweepRow>> {
    ensure!(!spec.axes.is_empty(), "sweep needs at least one axis");
    ensure!(!checkpoints.is_empty(), "sweep needs at least one checkpoint");
    let ids = spec.split.ids(tasks);
    let mut rows = Vec::new();
    for path in checkpoints {
        let model = Model::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
        for &axis in &spec.axes {
            for bath in spec.points(axis)? {
                let s = evaluate(&model, tasks, ids, &[bath])?.summary;
                log::info!("{} {} {bath}: F = {:.4}", path.display(), axis.name(), s.fidelity.mean);
                rows.push(SweepRow {
                    checkpoint: path.display().to_string(),
                    case: s.case,
                    algorithm: s.algorithm,
                    axis: axis.name().into(),
                    coupling_strength: bath.coupling_strength,
                    char_frequency: bath.char_frequency,
                    temperature: bath.temperature,
                    seen_in_training: seen_in_training(&model, &bath),
                    tasks: s.tasks,
                    fidelity_mean: s.fidelity.mean,
                    fidelity_above: s.fidelity.above,
                    fidelity_below: s.fidelity.below,
                    fidelity_std: s.fidelity.std,
                    final_fidelity_mean: s.final_fidelity.mean,
                    design_time_mean: s.design_time.mean,
                    mean_steps: s.mean_steps,
                    success_rate: s.success_rate,
                    checkpoint_hash: model.file_hash.clone(),
                    config_hash: config_hash.into(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn cmd_sweep(
    config: &ExperimentConfig,
    checkpoints: &[PathBuf],
    out: &Path,
    force: bool,
) -> anyhow::Result<Vec<SweepRow>> {
    let path = out.join("sweep.csv");
    guard_outputs(&[&path], force)?;
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| anyhow!("config has no `sweep` section"))?;
    let mut paths = spec.checkpoints.clone();
    paths.extend_from_slice(checkpoints);
    let rows = sweep_rows(spec, &paths, &config.task_set()?, &config.config_hash())?;
    io::write_csv(&path, &rows)?;
    Ok(rows)
}

/// Concatenates CSV files with identical headers, or JSON documents with the
/// same `schema_version` into an array.
pub fn cmd_report(inputs: &[PathBuf], out: &Path, force: bool) -> anyhow::Result<usize> {
    ensure!(!inputs.is_empty(), "report needs at least one input file");
    guard_outputs(&[out], force)?;
    let is_json = |p: &Path| p.extension().is_some_and(|e| e == "json");
    if inputs.iter().all(|p| is_json(p)) {
        let mut docs = Vec::new();
        let mut version = None;
        for p in inputs {
            let v: Value = io::read_json(p)?;
            let found = v.get("schema_version").cloned();
            ensure!(found.is_some(), "{} has no schema_version", p.display());
            if version.is_none() {
                version = found.clone();
            }
            ensure!(
                found == version,
                "{} has schema_version {:?}, expected {:?}",
                p.display(),
                found,
                version
            );
            match v {
                Value::Array(items) => docs.extend(items),
                other => docs.push(other),
            }
        }
        let n = docs.len();
        io::write_json(out, &docs)?;
        return Ok(n);
    }
    ensure!(!inputs.iter().any(|p| is_json(p)), "cannot mix JSON and CSV inputs");

    let mut header: Option<csv::StringRecord> = None;
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut rows = 0;
    for p in inputs {
        let mut reader = csv::Reader::from_path(p).with_context(|| format!("reading {}", p.display()))?;
        let h = reader.headers()?.clone();
        match &header {
            None => {
                writer.write_record(&h)?;
                header = Some(h);
            }
            Some(first) if *first != h => bail!("{} has columns {:?}, expected {:?}", p.display(), h, first),
            Some(_) => {}
        }
        for record in reader.records() {
            writer.write_record(&record?)?;
            rows += 1;
        }
    }
    io::write_bytes(out, &writer.into_inner().map_err(|e| anyhow!("{e}"))?)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: Value) -> ExperimentConfig {
        let c: ExperimentConfig = serde_json::from_value(json).unwrap();
        c.check().unwrap();
        c
    }

    #[test]
    fn defaults_match_tables() {
        let c = config(serde_json::json!({
            "defaults_profile": "table2", "case": 2, "algorithm": "drl",
            "bath": {"Gamma": 0.1, "gamma": 4.0, "T": 10.0}
        }));
        let s = c.drl_settings().unwrap();
        assert_eq!(s.hyper, DrlHyperparameters::table2(Case::FixedEnvironment));
        assert_eq!(s.seeds, Seeds::default());
        assert_eq!(c.evaluation.baths, vec![table1_bath()]);
    }

    #[test]
    fn overrides_apply_and_unknown_keys_fail() {
        let mut c = config(serde_json::json!({
            "defaults_profile": "table3", "case": 1, "algorithm": "sl",
            "overrides": {"epochs": 3, "batch_size": 8}
        }));
        let s = c.sl_settings().unwrap();
        assert_eq!((s.hyper.epochs, s.hyper.batch_size), (3, 8));
        assert_eq!(s.hyper.learning_rate, 0.001);
        c.overrides.insert("epochz".into(), Value::from(1));
        assert!(c.sl_settings().is_err());
    }

    #[test]
    fn profile_must_match_algorithm() {
        let c: ExperimentConfig = serde_json::from_value(serde_json::json!({
            "defaults_profile": "table3", "case": 1, "algorithm": "drl"
        }))
        .unwrap();
        assert!(c.check().is_err());
    }

    #[test]
    fn bath_requirements_per_case() {
        let c2 = config(serde_json::json!({"defaults_profile": "table2", "case": 2, "algorithm": "drl"}));
        assert!(c2.drl_settings().is_err());
        let c3 = config(serde_json::json!({"defaults_profile": "table3", "case": 3, "algorithm": "sl"}));
        assert!(c3.sl_settings().unwrap_err().to_string().contains("grid"));
        let c1 = config(serde_json::json!({
            "defaults_profile": "table2", "case": 1, "algorithm": "drl",
            "bath": {"Gamma": 0.1, "gamma": 4.0, "T": 10.0}
        }));
        assert!(c1.drl_settings().is_err());
    }

    #[test]
    fn seed_override_replaces_every_seed() {
        let c = config(serde_json::json!({"defaults_profile": "table2", "case": 1, "algorithm": "drl"}))
            .with_seeds(Some(5));
        assert_eq!(c.seeds, Seeds::all(5));
    }

    #[test]
    fn sweep_axis_holds_center() {
        let spec: SweepSpec = serde_json::from_value(serde_json::json!({
            "axes": ["Gamma"], "Gamma": [0.0, 0.2]
        }))
        .unwrap();
        let pts = spec.points(Axis::Gamma).unwrap();
        assert!(pts.iter().all(|b| b.char_frequency == 4.0 && b.temperature == 10.0));
        assert_eq!(pts[1].coupling_strength, 0.2);
        assert!(spec.points(Axis::T).is_err());
    }
}
