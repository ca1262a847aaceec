use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use qpulse_cli::{cmd_eval, cmd_gen_tasks, cmd_report, cmd_sweep, cmd_train, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "qpulse",
    version,
    about = "Train and evaluate pulse designers for qubit state preparation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces every seed in the config.
    #[arg(long, env = "QPULSE_SEED")]
    seed: Option<u64>,
    /// Output directory (a file path for `report`).
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
    /// Worker threads for rollouts and dataset generation.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the task file and the environment grid.
    GenTasks(Common),
    /// Train one model.
    Train(Common),
    /// Evaluate a checkpoint on a task split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate checkpoints along environment-parameter axes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
    },
    /// Merge result files.
    Report {
        #[command(flatten)]
        common: Common,
        inputs: Vec<PathBuf>,
    },
}

impl Common {
    fn setup(&self) -> anyhow::Result<()> {
        if let Some(n) = self.workers {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring worker pool")?;
        }
        Ok(())
    }

    fn config(&self) -> anyhow::Result<Option<ExperimentConfig>> {
        self.config
            .as_deref()
            .map(|p| ExperimentConfig::load(p).map(|c| c.with_seeds(self.seed)))
            .transpose()
    }

    fn require_config(&self) -> anyhow::Result<ExperimentConfig> {
        self.config()?.context("this command needs --config")
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenTasks(common) => {
            common.setup()?;
            let info = cmd_gen_tasks(common.config()?.as_ref(), common.seed, &common.out, common.force)?;
            println!("{}", serde_json::to_string_pretty(&info)?);
        }
        Command::Train(common) => {
            common.setup()?;
            let outputs = cmd_train(&common.require_config()?, &common.out, common.force)?;
            println!("checkpoint written to {}", outputs.checkpoint.display());
        }
        Command::Eval { common, checkpoint } => {
            common.setup()?;
            let file = cmd_eval(
                &common.require_config()?,
                checkpoint.as_deref(),
                &common.out,
                common.force,
            )?;
            let s = &file.summary;
            println!(
                "case {} {}: F = {:.4} (+{:.4} / -{:.4}), final F = {:.4}, t = {:.4} s, n = {:.2}, success = {:.3}",
                s.case,
                s.algorithm,
                s.fidelity.mean,
                s.fidelity.above,
                s.fidelity.below,
                s.final_fidelity.mean,
                s.design_time.mean,
                s.mean_steps,
                s.success_rate
            );
        }
        Command::Sweep { common, checkpoint } => {
            common.setup()?;
            let rows = cmd_sweep(&common.require_config()?, &checkpoint, &common.out, common.force)?;
            println!("{} sweep rows written", rows.len());
        }
        Command::Report { common, inputs } => {
            let n = cmd_report(&inputs, &common.out, common.force)?;
            println!("{n} records merged into {}", common.out.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
