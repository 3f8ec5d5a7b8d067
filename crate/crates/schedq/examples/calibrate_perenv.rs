//! Scratch: per-environment agents (the per-env reading of the evaluation
//! protocol): each environment gets its own replay buffer and four agents
//! trained on it with different seeds.

use anyhow::Result;
use rayon::prelude::*;

use schedq::env::{generate_env_suite, SuiteRanges};
use schedq::eval::build_report;
use schedq::nn::NetArchitecture;
use schedq::qlearn::{collect_samples, train, TrainConfig};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let master_seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let train_steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10000);
    let step_size: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3e-4);
    let gamma: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.9);
    let episodes_per_env: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(400);
    let epsilon: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.4);

    let ranges = SuiteRanges {
        n_users: 10,
        buffer_range: (3.0, 12.0),
        weight_range: (1.0, 3.0),
        penalty_range: (0.0, 1.0),
        sigma_w_range: (0.002, 0.015),
        sigma_p_range: (0.002, 0.015),
        memory_window: 2,
        max_steps: 400,
        normalize_state: false,
    };
    let suite = generate_env_suite(master_seed, 4, &ranges)?;
    let arch = NetArchitecture::test_profile_for(10);

    let started = std::time::Instant::now();
    let mut wins = 0;
    let mut best_adv = i32::MIN;
    for (ei, config) in suite.iter().enumerate() {
        let buffer = collect_samples(
            &[config.clone()],
            episodes_per_env,
            epsilon,
            master_seed ^ (ei as u64) << 8,
            200_000,
        )?;
        let agents: Vec<_> = (0..4u64)
            .into_par_iter()
            .map(|agent_seed| {
                let cfg = TrainConfig {
                    gamma,
                    target_update_period: 250,
                    step_size,
                    batch_size: 64,
                    train_steps,
                    epsilon,
                    momentum: Some(0.9),
                    sequential: false,
                    seed: 100 + 16 * ei as u64 + agent_seed,
                };
                train(&buffer, &arch, &cfg).expect("training").policy
            })
            .collect();
        let report = build_report(&[config.clone()], &agents, 20, master_seed ^ 0xe7a1)?;
        let row = &report.rows[0];
        let win = row.best_agent_mean >= row.greedy_mean;
        wins += win as usize;
        best_adv = best_adv.max(row.advantage_percent);
        println!(
            "env {ei}: greedy {:.2} | agents {:?} | best {:.2} | advantage {:+}% {}",
            row.greedy_mean,
            row.agent_means
                .iter()
                .map(|m| (m * 10.0).round() / 10.0)
                .collect::<Vec<_>>(),
            row.best_agent_mean,
            row.advantage_percent,
            if win { "WIN" } else { "lose" }
        );
    }
    println!(
        "summary: wins {wins}/4, best advantage {best_adv:+}%, {:.1} min",
        started.elapsed().as_secs_f64() / 60.0
    );
    Ok(())
}
