//! End-to-end tests of the staged file pipeline: every stage runs against
//! real files in a temp directory, and the documented formats and error
//! paths are exercised through the public surface the CLI uses.

use std::fs;
use std::path::Path;

use schedq::env::SuiteRanges;
use schedq::eval::EvalReport;
use schedq::nn::QNetwork;
use schedq::pipeline::{
    cmd_collect, cmd_evaluate, cmd_gen_env, cmd_report, cmd_train, CollectSpec, EvaluateSpec,
    GenEnvSpec, NetProfile, ReportSpec, RunManifest, TrainSpec,
};
use schedq::qlearn::{ReplayBuffer, TrainConfig};

fn small_ranges() -> SuiteRanges {
    SuiteRanges {
        n_users: 3,
        buffer_range: (2.0, 4.0),
        weight_range: (1.0, 2.0),
        penalty_range: (0.0, 1.0),
        sigma_w_range: (0.0, 0.02),
        sigma_p_range: (0.0, 0.02),
        memory_window: 2,
        max_steps: 60,
    }
}

fn quick_train_config() -> TrainConfig {
    TrainConfig {
        train_steps: 40,
        batch_size: 8,
        target_update_period: 10,
        ..TrainConfig::default()
    }
}

/// Walk the full pipeline once and sanity-check every artifact.
#[test]
fn full_pipeline_produces_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let gen = cmd_gen_env(
        &GenEnvSpec {
            count: 2,
            ranges: small_ranges(),
        },
        3,
        &root.join("suite"),
    )
    .unwrap();
    assert_eq!(gen.count, 2);

    let collect = cmd_collect(
        &CollectSpec {
            suite: gen.suite_path.display().to_string(),
            episodes_per_env: 4,
            epsilon: 0.8,
            capacity: 10_000,
            csv: true,
        },
        4,
        &root.join("collect"),
    )
    .unwrap();
    assert!(collect.transitions > 0);
    assert!(root.join("collect/replay.csv").exists());
    let buffer = ReplayBuffer::load(&collect.buffer_path).unwrap();
    assert_eq!(buffer.len(), collect.transitions);
    assert_eq!(buffer.n_users(), Some(3));

    let train = cmd_train(
        &TrainSpec {
            buffer: collect.buffer_path.display().to_string(),
            profile: NetProfile::Test,
            train: quick_train_config(),
        },
        5,
        &root.join("train"),
    )
    .unwrap();
    assert_eq!(train.iterations, 40);
    let loss_csv = fs::read_to_string(&train.loss_csv_path).unwrap();
    assert_eq!(loss_csv.lines().count(), 41, "header plus one row per step");
    let net = QNetwork::load_checkpoint(&train.checkpoint_path).unwrap();
    assert_eq!(net.architecture().output_dim, 3);
    assert_eq!(net.architecture().hidden_width, 256);

    let eval = cmd_evaluate(
        &EvaluateSpec {
            suite: gen.suite_path.display().to_string(),
            checkpoints: vec![train.checkpoint_path.display().to_string()],
            episodes_per_eval: 3,
        },
        6,
        &root.join("eval"),
    )
    .unwrap();
    assert_eq!(eval.environments, 2);
    let report_json: EvalReport =
        serde_json::from_str(&fs::read_to_string(&eval.evaluation_path).unwrap()).unwrap();
    assert_eq!(report_json.rows.len(), 2);
    for row in &report_json.rows {
        assert_eq!(row.greedy_episode_totals.len(), 3);
        assert_eq!(row.agent_episode_totals.len(), 1);
    }

    let report = cmd_report(
        &ReportSpec {
            evaluation: eval.evaluation_path.display().to_string(),
            grid_points: None,
        },
        &root.join("report"),
    )
    .unwrap();
    let table = fs::read_to_string(&report.report_csv_path).unwrap();
    assert_eq!(table.lines().count(), 3, "header plus one row per env");
    assert!(table.starts_with("env_id,greedy_result,best_agent_result,advantage_percent"));
    assert!(root.join("report/kde_env_01.svg").exists());
    assert!(root.join("report/kde_env_02.csv").exists());
    assert!(root.join("report/advantage_kde.svg").exists());

    // every stage left exactly one manifest
    for stage in ["suite", "collect", "train", "eval", "report"] {
        let manifest = RunManifest::load(&root.join(stage).join("manifest.json")).unwrap();
        assert_eq!(manifest.tool_version, env!("CARGO_PKG_VERSION"));
        for output in &manifest.outputs {
            assert!(root.join(stage).join(output).exists(), "{stage}/{output}");
        }
    }
}

#[test]
fn train_zero_steps_writes_initialized_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let gen = cmd_gen_env(
        &GenEnvSpec {
            count: 1,
            ranges: small_ranges(),
        },
        1,
        &root.join("suite"),
    )
    .unwrap();
    let collect = cmd_collect(
        &CollectSpec {
            suite: gen.suite_path.display().to_string(),
            episodes_per_env: 1,
            epsilon: 1.0,
            capacity: 1000,
            csv: false,
        },
        1,
        &root.join("collect"),
    )
    .unwrap();
    let train = cmd_train(
        &TrainSpec {
            buffer: collect.buffer_path.display().to_string(),
            profile: NetProfile::Test,
            train: TrainConfig {
                train_steps: 0,
                ..TrainConfig::default()
            },
        },
        2,
        &root.join("train"),
    )
    .unwrap();
    assert_eq!(train.iterations, 0);
    assert!(train.final_loss.is_none());
    let loss_csv = fs::read_to_string(&train.loss_csv_path).unwrap();
    assert_eq!(loss_csv.lines().count(), 1, "header only");
    assert!(QNetwork::load_checkpoint(&train.checkpoint_path).is_ok());
}

#[test]
fn paper_profile_checkpoint_header_records_architecture() {
    // gen a tiny 2-user suite so the paper-profile net stays small enough
    // to initialize quickly (2 users -> 6-dim input)
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut ranges = small_ranges();
    ranges.n_users = 2;
    let gen = cmd_gen_env(&GenEnvSpec { count: 1, ranges }, 9, &root.join("suite")).unwrap();
    let collect = cmd_collect(
        &CollectSpec {
            suite: gen.suite_path.display().to_string(),
            episodes_per_env: 1,
            epsilon: 1.0,
            capacity: 1000,
            csv: false,
        },
        9,
        &root.join("collect"),
    )
    .unwrap();
    let train = cmd_train(
        &TrainSpec {
            buffer: collect.buffer_path.display().to_string(),
            profile: NetProfile::Paper,
            train: TrainConfig {
                train_steps: 0,
                ..TrainConfig::default()
            },
        },
        9,
        &root.join("train"),
    )
    .unwrap();
    let net = QNetwork::load_checkpoint(&train.checkpoint_path).unwrap();
    assert_eq!(net.architecture().hidden_layers, 10);
    assert_eq!(net.architecture().hidden_width, 1024);
}

#[test]
fn evaluate_rejects_mismatched_checkpoint_naming_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // suite with 3 users, checkpoint trained for 2 users
    let gen3 = cmd_gen_env(
        &GenEnvSpec {
            count: 1,
            ranges: small_ranges(),
        },
        1,
        &root.join("suite3"),
    )
    .unwrap();
    let mut ranges2 = small_ranges();
    ranges2.n_users = 2;
    let gen2 = cmd_gen_env(
        &GenEnvSpec {
            count: 1,
            ranges: ranges2,
        },
        2,
        &root.join("suite2"),
    )
    .unwrap();
    let collect2 = cmd_collect(
        &CollectSpec {
            suite: gen2.suite_path.display().to_string(),
            episodes_per_env: 2,
            epsilon: 1.0,
            capacity: 1000,
            csv: false,
        },
        2,
        &root.join("collect2"),
    )
    .unwrap();
    let train2 = cmd_train(
        &TrainSpec {
            buffer: collect2.buffer_path.display().to_string(),
            profile: NetProfile::Test,
            train: quick_train_config(),
        },
        2,
        &root.join("train2"),
    )
    .unwrap();

    let err = cmd_evaluate(
        &EvaluateSpec {
            suite: gen3.suite_path.display().to_string(),
            checkpoints: vec![train2.checkpoint_path.display().to_string()],
            episodes_per_eval: 2,
        },
        3,
        &root.join("eval"),
    )
    .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("checkpoint.bin"), "missing checkpoint name: {msg}");
    assert!(msg.contains("suite.json"), "missing suite name: {msg}");
    assert!(msg.contains("output_dim 2"), "missing dims: {msg}");
}

#[test]
fn collect_zero_episodes_gives_empty_buffer() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let gen = cmd_gen_env(
        &GenEnvSpec {
            count: 1,
            ranges: small_ranges(),
        },
        1,
        &root.join("suite"),
    )
    .unwrap();
    let collect = cmd_collect(
        &CollectSpec {
            suite: gen.suite_path.display().to_string(),
            episodes_per_env: 0,
            epsilon: 0.5,
            capacity: 100,
            csv: false,
        },
        1,
        &root.join("collect"),
    )
    .unwrap();
    assert_eq!(collect.transitions, 0);
    let buffer = ReplayBuffer::load(&collect.buffer_path).unwrap();
    assert!(buffer.is_empty());
}

#[test]
fn suite_files_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GenEnvSpec {
        count: 3,
        ranges: small_ranges(),
    };
    let a = cmd_gen_env(&spec, 42, &dir.path().join("a")).unwrap();
    let b = cmd_gen_env(&spec, 42, &dir.path().join("b")).unwrap();
    assert_eq!(
        fs::read(&a.suite_path).unwrap(),
        fs::read(&b.suite_path).unwrap()
    );
    let c = cmd_gen_env(&spec, 43, &dir.path().join("c")).unwrap();
    assert_ne!(
        fs::read(&a.suite_path).unwrap(),
        fs::read(&c.suite_path).unwrap()
    );
}

fn assert_same_bytes(a: &Path, b: &Path) {
    assert_eq!(
        fs::read(a).unwrap(),
        fs::read(b).unwrap(),
        "{} differs from {}",
        a.display(),
        b.display()
    );
}

/// Rerunning any stage from its manifest reproduces the outputs exactly.
#[test]
fn rerun_from_manifest_reproduces_outputs() {
    use schedq::pipeline::rerun_from_manifest;

    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let gen = cmd_gen_env(
        &GenEnvSpec {
            count: 2,
            ranges: small_ranges(),
        },
        11,
        &root.join("suite"),
    )
    .unwrap();
    let rerun = rerun_from_manifest(&gen.manifest_path, &root.join("suite_rerun")).unwrap();
    assert_same_bytes(&gen.suite_path, &rerun[0]);

    let collect = cmd_collect(
        &CollectSpec {
            suite: gen.suite_path.display().to_string(),
            episodes_per_env: 3,
            epsilon: 0.4,
            capacity: 10_000,
            csv: false,
        },
        12,
        &root.join("collect"),
    )
    .unwrap();
    let rerun = rerun_from_manifest(
        &root.join("collect/manifest.json"),
        &root.join("collect_rerun"),
    )
    .unwrap();
    assert_same_bytes(&collect.buffer_path, &rerun[0]);
}
