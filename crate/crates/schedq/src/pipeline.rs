//! The staged experiment pipeline behind the command-line interface.
//!
//! Every stage reads files produced by the previous one, writes its outputs
//! plus a `manifest.json` into a fresh directory, and is reproducible from
//! that manifest alone:
//!
//! ```text
//! gen-env -> suite.json
//! collect -> replay.bin
//! train   -> checkpoint.bin + loss_history.csv
//! evaluate-> evaluation.json
//! report  -> report.csv + KDE CSVs + SVG plots
//! ```
//!
//! Outputs are written atomically (temp file, then rename), so a crashed run
//! never leaves a half-written artifact under its final name.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{generate_env_suite, EnvConfig, SuiteRanges};
use crate::error::{Error, Result};
use crate::eval::{build_report, kde, EvalReport};
use crate::nn::{NetArchitecture, QNetwork};
use crate::plot;
use crate::qlearn::{collect_samples, train, ReplayBuffer, TrainConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one pipeline stage: enough to rerun it bit-for-bit (given the
/// input files it names) and to audit where an artifact came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub master_seed: u64,
    /// The stage's fully resolved configuration, including input paths.
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    /// File names written next to the manifest.
    pub outputs: Vec<String>,
    pub created_at: String,
}

impl RunManifest {
    fn new(
        subcommand: &str,
        master_seed: u64,
        config: serde_json::Value,
        inputs: Vec<String>,
        outputs: Vec<String>,
    ) -> Self {
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            subcommand: subcommand.to_string(),
            master_seed,
            config,
            inputs,
            outputs,
            created_at: chrono::Utc::now().to_rfc3339(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

fn prepare_out_dir(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest = out_dir.join(MANIFEST_FILE);
    if manifest.exists() {
        return Err(Error::InvalidArgument(format!(
            "{} already contains a manifest; every stage wants its own output directory",
            out_dir.display()
        )));
    }
    Ok(())
}

fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    write_bytes_atomic(path, text.as_bytes())
}

fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = out_dir.join(MANIFEST_FILE);
    write_json_atomic(&path, manifest)?;
    Ok(path)
}

fn load_suite(path: &Path) -> Result<Vec<EnvConfig>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let suite: Vec<EnvConfig> = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    for (i, cfg) in suite.iter().enumerate() {
        cfg.validate()
            .map_err(|e| Error::InvalidConfig(format!("suite entry {i}: {e}")))?;
    }
    Ok(suite)
}

// ---------------------------------------------------------------------------
// gen-env
// ---------------------------------------------------------------------------

/// Resolved configuration of the `gen-env` stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenEnvSpec {
    pub count: usize,
    pub ranges: SuiteRanges,
}

impl Default for GenEnvSpec {
    fn default() -> Self {
        GenEnvSpec {
            count: 16,
            ranges: SuiteRanges::default(),
        }
    }
}

#[derive(Debug)]
pub struct GenEnvOutput {
    pub suite_path: PathBuf,
    pub manifest_path: PathBuf,
    pub count: usize,
}

/// Generates an environment suite and writes it as a JSON array of configs.
pub fn cmd_gen_env(spec: &GenEnvSpec, seed: u64, out_dir: &Path) -> Result<GenEnvOutput> {
    prepare_out_dir(out_dir)?;
    let suite = generate_env_suite(seed, spec.count, &spec.ranges)?;
    let suite_path = out_dir.join("suite.json");
    write_json_atomic(&suite_path, &suite)?;
    let manifest = RunManifest::new(
        "gen-env",
        seed,
        serde_json::to_value(spec).expect("spec serializes"),
        vec![],
        vec!["suite.json".to_string()],
    );
    let manifest_path = write_manifest(out_dir, &manifest)?;
    Ok(GenEnvOutput {
        suite_path,
        manifest_path,
        count: suite.len(),
    })
}

// ---------------------------------------------------------------------------
// collect
// ---------------------------------------------------------------------------

/// Resolved configuration of the `collect` stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollectSpec {
    /// Path of the env-suite file.
    pub suite: String,
    pub episodes_per_env: usize,
    /// Probability of a uniform-random action during collection.
    pub epsilon: f64,
    pub capacity: usize,
    /// Also export the buffer as CSV for inspection.
    #[serde(default)]
    pub csv: bool,
}

impl Default for CollectSpec {
    fn default() -> Self {
        CollectSpec {
            suite: "suite.json".to_string(),
            episodes_per_env: 10,
            epsilon: 0.5,
            capacity: 1_000_000,
            csv: false,
        }
    }
}

#[derive(Debug)]
pub struct CollectOutput {
    pub buffer_path: PathBuf,
    pub manifest_path: PathBuf,
    pub transitions: usize,
}

/// Runs seeded collection episodes over a suite and writes the replay
/// buffer.
pub fn cmd_collect(spec: &CollectSpec, seed: u64, out_dir: &Path) -> Result<CollectOutput> {
    prepare_out_dir(out_dir)?;
    let suite_path = PathBuf::from(&spec.suite);
    if !suite_path.exists() {
        return Err(Error::io(
            &suite_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "env-suite file not found"),
        ));
    }
    let suite = load_suite(&suite_path)?;
    let buffer = collect_samples(&suite, spec.episodes_per_env, spec.epsilon, seed, spec.capacity)?;
    if buffer.is_empty() {
        eprintln!("warning: collection produced an empty replay buffer");
    }

    let buffer_path = out_dir.join("replay.bin");
    let tmp = tmp_path(&buffer_path);
    buffer.save(&tmp)?;
    fs::rename(&tmp, &buffer_path).map_err(|e| Error::io(&buffer_path, e))?;

    let mut outputs = vec!["replay.bin".to_string()];
    if spec.csv {
        let csv_path = out_dir.join("replay.csv");
        let tmp = tmp_path(&csv_path);
        buffer.export_csv(&tmp)?;
        fs::rename(&tmp, &csv_path).map_err(|e| Error::io(&csv_path, e))?;
        outputs.push("replay.csv".to_string());
    }

    let manifest = RunManifest::new(
        "collect",
        seed,
        serde_json::to_value(spec).expect("spec serializes"),
        vec![spec.suite.clone()],
        outputs,
    );
    let manifest_path = write_manifest(out_dir, &manifest)?;
    Ok(CollectOutput {
        buffer_path,
        manifest_path,
        transitions: buffer.len(),
    })
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Which network architecture a training run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NetProfile {
    /// Three hidden layers of 256 units.
    Test,
    /// Ten hidden layers of 1024 units.
    Paper,
}

impl NetProfile {
    pub fn architecture_for(&self, n_users: usize) -> NetArchitecture {
        match self {
            NetProfile::Test => NetArchitecture::test_profile_for(n_users),
            NetProfile::Paper => NetArchitecture::paper_profile_for(n_users),
        }
    }
}

/// Resolved configuration of the `train` stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSpec {
    /// Path of the replay-buffer file.
    pub buffer: String,
    pub profile: NetProfile,
    pub train: TrainConfig,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub checkpoint_path: PathBuf,
    pub loss_csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub iterations: usize,
    pub final_loss: Option<f64>,
}

/// Trains a Q-network offline from a stored replay buffer and writes the
/// checkpoint plus a per-iteration loss CSV.
///
/// The training seed comes from `spec.train.seed`; the stage-level `seed`
/// argument overrides it when they differ so that every subcommand obeys one
/// `--seed` flag.
pub fn cmd_train(spec: &TrainSpec, seed: u64, out_dir: &Path) -> Result<TrainOutput> {
    prepare_out_dir(out_dir)?;
    let buffer_path = PathBuf::from(&spec.buffer);
    if !buffer_path.exists() {
        return Err(Error::io(
            &buffer_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "replay-buffer file not found"),
        ));
    }
    let buffer = ReplayBuffer::load(&buffer_path)?;
    let n_users = buffer.n_users().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "replay buffer {} does not determine a user count (empty or malformed states)",
            buffer_path.display()
        ))
    })?;
    let arch = spec.profile.architecture_for(n_users);

    let mut cfg = spec.train.clone();
    cfg.seed = seed;
    let outcome = train(&buffer, &arch, &cfg)?;

    let checkpoint_path = out_dir.join("checkpoint.bin");
    let tmp = tmp_path(&checkpoint_path);
    outcome.policy.save_checkpoint(&tmp)?;
    fs::rename(&tmp, &checkpoint_path).map_err(|e| Error::io(&checkpoint_path, e))?;

    let mut csv = String::from("iteration,loss\n");
    for (i, loss) in outcome.loss_history.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, loss));
    }
    let loss_csv_path = out_dir.join("loss_history.csv");
    write_bytes_atomic(&loss_csv_path, csv.as_bytes())?;

    let resolved = TrainSpec {
        buffer: spec.buffer.clone(),
        profile: spec.profile,
        train: cfg,
    };
    let manifest = RunManifest::new(
        "train",
        seed,
        serde_json::to_value(&resolved).expect("spec serializes"),
        vec![spec.buffer.clone()],
        vec!["checkpoint.bin".to_string(), "loss_history.csv".to_string()],
    );
    let manifest_path = write_manifest(out_dir, &manifest)?;
    Ok(TrainOutput {
        checkpoint_path,
        loss_csv_path,
        manifest_path,
        iterations: outcome.loss_history.len(),
        final_loss: outcome.loss_history.last().copied(),
    })
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Resolved configuration of the `evaluate` stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateSpec {
    pub suite: String,
    pub checkpoints: Vec<String>,
    pub episodes_per_eval: usize,
}

#[derive(Debug)]
pub struct EvaluateOutput {
    pub evaluation_path: PathBuf,
    pub manifest_path: PathBuf,
    pub environments: usize,
    pub agents: usize,
}

/// Runs the greedy baseline and every checkpointed agent over a suite and
/// writes the full evaluation report as JSON.
pub fn cmd_evaluate(spec: &EvaluateSpec, seed: u64, out_dir: &Path) -> Result<EvaluateOutput> {
    prepare_out_dir(out_dir)?;
    let suite = load_suite(Path::new(&spec.suite))?;
    let n_users = suite.first().map(|c| c.n_users).ok_or_else(|| {
        Error::InvalidArgument(format!("suite {} is empty", spec.suite))
    })?;
    if let Some(other) = suite.iter().find(|c| c.n_users != n_users) {
        return Err(Error::InvalidConfig(format!(
            "suite {} mixes user counts ({} and {})",
            spec.suite, n_users, other.n_users
        )));
    }

    let mut agents = Vec::with_capacity(spec.checkpoints.len());
    for ckpt in &spec.checkpoints {
        let net = QNetwork::load_checkpoint(Path::new(ckpt))?;
        let arch = net.architecture();
        if arch.output_dim != n_users {
            return Err(Error::InvalidArgument(format!(
                "checkpoint {} has output_dim {} but suite {} has {} users",
                ckpt, arch.output_dim, spec.suite, n_users
            )));
        }
        agents.push(net);
    }

    let report = build_report(&suite, &agents, spec.episodes_per_eval, seed)?;
    let evaluation_path = out_dir.join("evaluation.json");
    write_json_atomic(&evaluation_path, &report)?;

    let mut inputs = vec![spec.suite.clone()];
    inputs.extend(spec.checkpoints.iter().cloned());
    let manifest = RunManifest::new(
        "evaluate",
        seed,
        serde_json::to_value(spec).expect("spec serializes"),
        inputs,
        vec!["evaluation.json".to_string()],
    );
    let manifest_path = write_manifest(out_dir, &manifest)?;
    Ok(EvaluateOutput {
        evaluation_path,
        manifest_path,
        environments: report.rows.len(),
        agents: agents.len(),
    })
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

/// Resolved configuration of the `report` stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportSpec {
    pub evaluation: String,
    /// Regenerate KDE curves on a grid of this size instead of using the
    /// curves stored in the evaluation.
    #[serde(default)]
    pub grid_points: Option<usize>,
}

#[derive(Debug)]
pub struct ReportOutput {
    pub report_csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Renders an evaluation into the aggregate table plus per-environment KDE
/// CSVs and SVG plots.
pub fn cmd_report(spec: &ReportSpec, out_dir: &Path) -> Result<ReportOutput> {
    prepare_out_dir(out_dir)?;
    let eval_path = PathBuf::from(&spec.evaluation);
    let text = fs::read_to_string(&eval_path).map_err(|e| Error::io(&eval_path, e))?;
    let report: EvalReport = serde_json::from_str(&text).map_err(|e| Error::json(&eval_path, e))?;

    let mut output_names = Vec::new();
    let mut files = Vec::new();

    // aggregate table, one row per environment
    let mut table = String::from("env_id,greedy_result,best_agent_result,advantage_percent\n");
    for row in &report.rows {
        table.push_str(&format!(
            "{},{},{},{}\n",
            row.env_id, row.greedy_mean, row.best_agent_mean, row.advantage_percent
        ));
    }
    let report_csv_path = out_dir.join("report.csv");
    write_bytes_atomic(&report_csv_path, table.as_bytes())?;
    output_names.push("report.csv".to_string());
    files.push(report_csv_path.clone());

    // per-environment agent-reward densities
    for row in &report.rows {
        let curve = match spec.grid_points {
            Some(points) => kde(&row.agent_means, points)?,
            None => row.kde.clone(),
        };
        let csv_name = format!("kde_env_{:02}.csv", row.env_id);
        let mut csv = String::from("total_reward,density\n");
        for (g, d) in curve.grid.iter().zip(&curve.density) {
            csv.push_str(&format!("{g},{d}\n"));
        }
        let csv_path = out_dir.join(&csv_name);
        write_bytes_atomic(&csv_path, csv.as_bytes())?;
        output_names.push(csv_name);
        files.push(csv_path);

        let svg_name = format!("kde_env_{:02}.svg", row.env_id);
        let svg = plot::kde_svg(
            &curve,
            Some(row.greedy_mean),
            &format!("agent reward distribution, environment {}", row.env_id),
        );
        let svg_path = out_dir.join(&svg_name);
        write_bytes_atomic(&svg_path, svg.as_bytes())?;
        output_names.push(svg_name);
        files.push(svg_path);
    }

    // distribution of best-agent advantages across environments
    let advantages: Vec<f64> = report
        .rows
        .iter()
        .map(|r| r.advantage_percent as f64)
        .collect();
    let adv_curve = kde(&advantages, spec.grid_points.unwrap_or(256))?;
    let mut adv_csv = String::from("advantage_percent,density\n");
    for (g, d) in adv_curve.grid.iter().zip(&adv_curve.density) {
        adv_csv.push_str(&format!("{g},{d}\n"));
    }
    let adv_csv_path = out_dir.join("advantage_kde.csv");
    write_bytes_atomic(&adv_csv_path, adv_csv.as_bytes())?;
    output_names.push("advantage_kde.csv".to_string());
    files.push(adv_csv_path);

    let adv_svg = plot::kde_svg(&adv_curve, None, "best-agent advantage across environments");
    let adv_svg_path = out_dir.join("advantage_kde.svg");
    write_bytes_atomic(&adv_svg_path, adv_svg.as_bytes())?;
    output_names.push("advantage_kde.svg".to_string());
    files.push(adv_svg_path);

    let manifest = RunManifest::new(
        "report",
        0,
        serde_json::to_value(spec).expect("spec serializes"),
        vec![spec.evaluation.clone()],
        output_names,
    );
    let manifest_path = write_manifest(out_dir, &manifest)?;
    Ok(ReportOutput {
        report_csv_path,
        manifest_path,
        files,
    })
}

// ---------------------------------------------------------------------------
// rerun
// ---------------------------------------------------------------------------

/// Reruns the stage a manifest describes, writing into `out_dir`. Outputs
/// are byte-identical to the original run as long as the manifest's input
/// files are unchanged.
pub fn rerun_from_manifest(manifest_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = RunManifest::load(manifest_path)?;
    let cfg = manifest.config.clone();
    let parse_err = |e: serde_json::Error| Error::json(manifest_path, e);
    match manifest.subcommand.as_str() {
        "gen-env" => {
            let spec: GenEnvSpec = serde_json::from_value(cfg).map_err(parse_err)?;
            let out = cmd_gen_env(&spec, manifest.master_seed, out_dir)?;
            Ok(vec![out.suite_path])
        }
        "collect" => {
            let spec: CollectSpec = serde_json::from_value(cfg).map_err(parse_err)?;
            let out = cmd_collect(&spec, manifest.master_seed, out_dir)?;
            Ok(vec![out.buffer_path])
        }
        "train" => {
            let spec: TrainSpec = serde_json::from_value(cfg).map_err(parse_err)?;
            let out = cmd_train(&spec, manifest.master_seed, out_dir)?;
            Ok(vec![out.checkpoint_path, out.loss_csv_path])
        }
        "evaluate" => {
            let spec: EvaluateSpec = serde_json::from_value(cfg).map_err(parse_err)?;
            let out = cmd_evaluate(&spec, manifest.master_seed, out_dir)?;
            Ok(vec![out.evaluation_path])
        }
        "report" => {
            let spec: ReportSpec = serde_json::from_value(cfg).map_err(parse_err)?;
            let out = cmd_report(&spec, out_dir)?;
            Ok(out.files)
        }
        other => Err(Error::InvalidArgument(format!(
            "manifest names unknown subcommand {other:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gen_env_writes_suite_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("suite");
        let spec = GenEnvSpec {
            count: 4,
            ranges: SuiteRanges {
                n_users: 3,
                max_steps: 60,
                ..SuiteRanges::default()
            },
        };
        let result = cmd_gen_env(&spec, 5, &out).unwrap();
        assert_eq!(result.count, 4);
        let suite = load_suite(&result.suite_path).unwrap();
        assert_eq!(suite.len(), 4);
        let manifest = RunManifest::load(&result.manifest_path).unwrap();
        assert_eq!(manifest.subcommand, "gen-env");
        assert_eq!(manifest.outputs, vec!["suite.json"]);
    }

    #[test]
    fn second_stage_in_same_dir_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("suite");
        let spec = GenEnvSpec {
            count: 1,
            ranges: SuiteRanges {
                n_users: 2,
                max_steps: 30,
                ..SuiteRanges::default()
            },
        };
        cmd_gen_env(&spec, 5, &out).unwrap();
        assert!(cmd_gen_env(&spec, 5, &out).is_err());
    }

    #[test]
    fn collect_reports_missing_suite() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CollectSpec {
            suite: dir.path().join("nope.json").display().to_string(),
            ..CollectSpec::default()
        };
        let err = cmd_collect(&spec, 0, &dir.path().join("out")).unwrap_err();
        assert!(err.to_string().contains("nope.json"));
    }
}
