//! Command-line front end for the staged experiment pipeline.
//!
//! Each subcommand wraps one library stage and writes its outputs plus a
//! manifest into `--out`. See the crate README for a walkthrough.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use schedq::pipeline::{
    cmd_collect, cmd_evaluate, cmd_gen_env, cmd_report, cmd_train, CollectSpec, EvaluateSpec,
    GenEnvSpec, NetProfile, ReportSpec, TrainSpec,
};
use schedq::qlearn::TrainConfig;

#[derive(Parser)]
#[command(name = "schedq", version, about = "user-scheduling experiments: environments, samples, offline DQN training, reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Master seed for this stage.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (must not already hold a manifest).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for episode-level parallelism (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// JSON file with the stage configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a suite of environment configs.
    GenEnv {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of environments.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Collect replay samples from an env suite.
    Collect {
        #[command(flatten)]
        common: CommonArgs,
        /// Env-suite JSON file.
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Episodes per environment.
        #[arg(long)]
        episodes: Option<usize>,
        /// Probability of a uniform-random action (rest is greedy).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Replay buffer capacity.
        #[arg(long)]
        capacity: Option<usize>,
        /// Also export the buffer as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Train a Q-network offline from a replay buffer.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Replay-buffer file.
        #[arg(long)]
        buffer: Option<PathBuf>,
        /// Network size profile.
        #[arg(long, value_enum)]
        profile: Option<NetProfile>,
        #[arg(long)]
        train_steps: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        step_size: Option<f64>,
        /// Target-network sync period (iterations).
        #[arg(long)]
        target_update: Option<usize>,
        /// Momentum coefficient (omit for a plain gradient step).
        #[arg(long)]
        momentum: Option<f64>,
        /// Single in-order pass over the buffer instead of batched sampling.
        #[arg(long)]
        sequential: bool,
    },
    /// Evaluate checkpoints and the greedy baseline over a suite.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Env-suite JSON file.
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Checkpoint file; repeat for several agents.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        /// Evaluation episodes per environment and policy.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Render an evaluation into the aggregate table, KDE CSVs and SVGs.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        /// evaluation.json produced by `evaluate`.
        #[arg(long)]
        evaluation: Option<PathBuf>,
        /// KDE grid size override.
        #[arg(long)]
        grid_points: Option<usize>,
    },
}

fn read_config<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_config<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => read_config(p),
        None => Ok(T::default()),
    }
}

fn in_thread_pool<T>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T>
where
    T: Send,
{
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    Ok(pool.install(f))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenEnv { common, count } => {
            let mut spec: GenEnvSpec = load_config(&common.config)?;
            if let Some(count) = count {
                spec.count = count;
            }
            let out = cmd_gen_env(&spec, common.seed, &common.out)?;
            println!(
                "wrote {} environments to {}",
                out.count,
                out.suite_path.display()
            );
        }
        Command::Collect {
            common,
            suite,
            episodes,
            epsilon,
            capacity,
            csv,
        } => {
            let mut spec: CollectSpec = load_config(&common.config)?;
            if let Some(suite) = suite {
                spec.suite = suite.display().to_string();
            }
            if let Some(episodes) = episodes {
                spec.episodes_per_env = episodes;
            }
            if let Some(epsilon) = epsilon {
                spec.epsilon = epsilon;
            }
            if let Some(capacity) = capacity {
                spec.capacity = capacity;
            }
            spec.csv |= csv;
            let out = in_thread_pool(common.jobs, || cmd_collect(&spec, common.seed, &common.out))??;
            println!(
                "collected {} transitions into {}",
                out.transitions,
                out.buffer_path.display()
            );
        }
        Command::Train {
            common,
            buffer,
            profile,
            train_steps,
            batch_size,
            gamma,
            step_size,
            target_update,
            momentum,
            sequential,
        } => {
            let mut spec: TrainSpec = match &common.config {
                Some(p) => read_config(p)?,
                None => TrainSpec {
                    buffer: "replay.bin".to_string(),
                    profile: NetProfile::Test,
                    train: TrainConfig::default(),
                },
            };
            if let Some(buffer) = buffer {
                spec.buffer = buffer.display().to_string();
            }
            if let Some(profile) = profile {
                spec.profile = profile;
            }
            if let Some(v) = train_steps {
                spec.train.train_steps = v;
            }
            if let Some(v) = batch_size {
                spec.train.batch_size = v;
            }
            if let Some(v) = gamma {
                spec.train.gamma = v;
            }
            if let Some(v) = step_size {
                spec.train.step_size = v;
            }
            if let Some(v) = target_update {
                spec.train.target_update_period = v;
            }
            if momentum.is_some() {
                spec.train.momentum = momentum;
            }
            spec.train.sequential |= sequential;
            let out = cmd_train(&spec, common.seed, &common.out)?;
            match out.final_loss {
                Some(loss) => println!(
                    "trained for {} iterations (final batch loss {loss:.6}); checkpoint at {}",
                    out.iterations,
                    out.checkpoint_path.display()
                ),
                None => println!(
                    "wrote untrained checkpoint to {}",
                    out.checkpoint_path.display()
                ),
            }
        }
        Command::Evaluate {
            common,
            suite,
            checkpoints,
            episodes,
        } => {
            let mut spec: EvaluateSpec = match &common.config {
                Some(p) => read_config(p)?,
                None => EvaluateSpec {
                    suite: "suite.json".to_string(),
                    checkpoints: Vec::new(),
                    episodes_per_eval: 100,
                },
            };
            if let Some(suite) = suite {
                spec.suite = suite.display().to_string();
            }
            if !checkpoints.is_empty() {
                spec.checkpoints = checkpoints
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect();
            }
            if let Some(episodes) = episodes {
                spec.episodes_per_eval = episodes;
            }
            let out =
                in_thread_pool(common.jobs, || cmd_evaluate(&spec, common.seed, &common.out))??;
            println!(
                "evaluated {} agents on {} environments; {}",
                out.agents,
                out.environments,
                out.evaluation_path.display()
            );
        }
        Command::Report {
            common,
            evaluation,
            grid_points,
        } => {
            let mut spec: ReportSpec = match &common.config {
                Some(p) => read_config(p)?,
                None => ReportSpec {
                    evaluation: "evaluation.json".to_string(),
                    grid_points: None,
                },
            };
            if let Some(evaluation) = evaluation {
                spec.evaluation = evaluation.display().to_string();
            }
            if grid_points.is_some() {
                spec.grid_points = grid_points;
            }
            let out = cmd_report(&spec, &common.out)?;
            println!(
                "wrote {} report files; table at {}",
                out.files.len(),
                out.report_csv_path.display()
            );
        }
    }
    Ok(())
}
