//! The whole experiment pipeline, desk-sized: generate environments,
//! collect samples, train two agents, evaluate against greedy, render the
//! report. Identical to what the `schedq` binary does, driven through the
//! library.
//!
//! Run with: `cargo run --release --example full_pipeline`

use anyhow::Result;

use schedq::env::SuiteRanges;
use schedq::pipeline::{
    cmd_collect, cmd_evaluate, cmd_gen_env, cmd_report, cmd_train, CollectSpec, EvaluateSpec,
    GenEnvSpec, NetProfile, ReportSpec, TrainSpec,
};
use schedq::qlearn::TrainConfig;

fn main() -> Result<()> {
    let root = std::env::temp_dir().join("schedq_pipeline_demo");
    if root.exists() {
        std::fs::remove_dir_all(&root)?;
    }

    // Stage 1: a small suite of four-user environments.
    let gen = cmd_gen_env(
        &GenEnvSpec {
            count: 3,
            ranges: SuiteRanges {
                n_users: 4,
                buffer_range: (3.0, 8.0),
                weight_range: (1.0, 2.0),
                penalty_range: (0.0, 1.0),
                sigma_w_range: (0.005, 0.02),
                sigma_p_range: (0.005, 0.02),
                memory_window: 2,
                max_steps: 100,
                normalize_state: true,
            },
        },
        7,
        &root.join("suite"),
    )?;
    println!("[gen-env]  {} environments -> {}", gen.count, gen.suite_path.display());

    // Stage 2: replay samples from an epsilon-mixed policy.
    let collect = cmd_collect(
        &CollectSpec {
            suite: gen.suite_path.display().to_string(),
            episodes_per_env: 40,
            epsilon: 0.5,
            capacity: 100_000,
            csv: false,
        },
        8,
        &root.join("collect"),
    )?;
    println!("[collect]  {} transitions -> {}", collect.transitions, collect.buffer_path.display());

    // Stage 3: two offline agents from the same sample base.
    let mut checkpoints = Vec::new();
    for seed in [100u64, 101] {
        let train = cmd_train(
            &TrainSpec {
                buffer: collect.buffer_path.display().to_string(),
                profile: NetProfile::Test,
                train: TrainConfig {
                    gamma: 0.95,
                    target_update_period: 250,
                    step_size: 5e-4,
                    batch_size: 64,
                    train_steps: 3000,
                    epsilon: 0.5,
                    momentum: Some(0.9),
                    sequential: false,
                    seed,
                },
            },
            seed,
            &root.join(format!("train_{seed}")),
        )?;
        println!(
            "[train]    seed {seed}: {} iterations, final loss {:.5}",
            train.iterations,
            train.final_loss.unwrap_or(f64::NAN)
        );
        checkpoints.push(train.checkpoint_path.display().to_string());
    }

    // Stage 4: evaluate both agents and greedy on fresh episodes.
    let eval = cmd_evaluate(
        &EvaluateSpec {
            suite: gen.suite_path.display().to_string(),
            checkpoints,
            episodes_per_eval: 25,
        },
        9,
        &root.join("eval"),
    )?;
    println!("[evaluate] {} envs x {} agents -> {}", eval.environments, eval.agents, eval.evaluation_path.display());

    // Stage 5: table + density plots.
    let report = cmd_report(
        &ReportSpec {
            evaluation: eval.evaluation_path.display().to_string(),
            grid_points: None,
        },
        &root.join("report"),
    )?;
    println!("[report]   {} files under {}", report.files.len(), root.join("report").display());
    println!("\n{}", std::fs::read_to_string(&report.report_csv_path)?);
    Ok(())
}
