//! Scratch sweep for picking training hyperparameters. Not part of the
//! shipped examples; deleted once values are frozen.

use anyhow::Result;

use schedq::baseline::{brute_force_optimal, run_greedy_episode, DEFAULT_ORACLE_BUDGET};
use schedq::env::EnvConfig;
use schedq::eval::run_agent_episode;
use schedq::nn::NetArchitecture;
use schedq::qlearn::{collect_samples, train, TrainConfig};

fn trap_config() -> EnvConfig {
    EnvConfig {
        n_users: 3,
        initial_buffers: vec![2.0, 2.0, 2.0],
        initial_weights: vec![1.0, 1.0, 1.0],
        initial_penalty_matrix: vec![
            vec![0.0, 0.0, 0.05],
            vec![0.0, 0.0, 0.05],
            vec![1.0, 1.0, 0.0],
        ],
        memory_window: 2,
        sigma_w: 0.0,
        sigma_p: 0.0,
        w_bounds: (0.5, 2.0),
        p_max: 1.0,
        max_steps: 50,
        seed: 7,
        normalize_state: true,
    }
}

fn main() -> Result<()> {
    let config = trap_config();
    let greedy = run_greedy_episode(&config)?;
    let oracle = brute_force_optimal(&config, DEFAULT_ORACLE_BUDGET)?;
    println!("greedy {:.3} oracle {:.3}", greedy.total_reward, oracle.total_reward);

    let buffer = collect_samples(&[config.clone()], 334, 1.0, 11, 2000)?;
    let arch = NetArchitecture::test_profile_for(config.n_users);

    let combos: Vec<(f64, usize, usize, Option<f64>, f64)> = vec![
        // (step_size, steps, upd, momentum, gamma)
        (2e-3, 6000, 200, Some(0.9), 0.99),
        (2e-3, 6000, 200, Some(0.9), 0.99),
        (2e-3, 6000, 200, Some(0.9), 0.99),
        (2e-3, 6000, 200, Some(0.9), 0.99),
    ];
    for (run_seed, (step_size, train_steps, upd, momentum, gamma)) in (1u64..).zip(combos) {
        let cfg = TrainConfig {
            gamma,
            target_update_period: upd,
            step_size,
            batch_size: 64,
            train_steps,
            epsilon: 1.0,
            momentum,
            sequential: false,
            seed: run_seed,
        };
        let start = std::time::Instant::now();
        match train(&buffer, &arch, &cfg) {
            Ok(outcome) => {
                let agent = run_agent_episode(&outcome.policy, &config, config.seed)?;
                let regret =
                    (oracle.total_reward - agent.total_reward) / oracle.total_reward.abs();
                println!(
                    "lr={step_size:.0e} steps={train_steps} upd={upd} mom={momentum:?} gamma={gamma}: \
                     loss {:.4}->{:.5}, agent {:.3} {:?}, regret {:.4}, {:.0?}",
                    outcome.loss_history[0],
                    outcome.loss_history.last().unwrap(),
                    agent.total_reward,
                    agent.actions,
                    regret,
                    start.elapsed(),
                );
            }
            Err(e) => println!(
                "lr={step_size:.0e} steps={train_steps} upd={upd} mom={momentum:?}: DIVERGED: {e}"
            ),
        }
    }
    Ok(())
}
