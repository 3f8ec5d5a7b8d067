//! Offline DQN on a tiny scheduling instance where greedy is provably
//! suboptimal.
//!
//! The instance traps the greedy baseline: users 0 and 1 cost nothing to
//! alternate, so greedy drains them first — but user 2 interferes badly with
//! both, and serving it against the history greedy builds costs 3.0. The
//! exhaustive oracle shows that serving user 2 *first* costs only 0.15 in
//! total. A Q-network trained purely offline, from uniformly random
//! episodes, recovers that strategy exactly.
//!
//! Run with: `cargo run --release --example train_tiny_mdp`

use anyhow::Result;

use schedq::baseline::{brute_force_optimal, run_greedy_episode, DEFAULT_ORACLE_BUDGET};
use schedq::env::EnvConfig;
use schedq::eval::run_agent_episode;
use schedq::nn::NetArchitecture;
use schedq::qlearn::{collect_samples, train, TrainConfig};

/// Three users, two serves each, static dynamics. Greedy pays 3.0 here
/// while the optimum pays 0.15.
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
    println!(
        "greedy total reward: {:.3}  actions {:?}",
        greedy.total_reward, greedy.actions
    );
    println!(
        "oracle total reward: {:.3}  actions {:?}",
        oracle.total_reward, oracle.actions
    );
    assert!(oracle.total_reward > greedy.total_reward);

    // ~334 uniform-random episodes of 6 steps; capacity trims to 2000.
    let buffer = collect_samples(&[config.clone()], 334, 1.0, 11, 2000)?;
    println!("collected {} transitions", buffer.len());

    let arch = NetArchitecture::test_profile_for(config.n_users);
    let cfg = TrainConfig {
        gamma: 0.99,
        target_update_period: 200,
        step_size: 2e-3,
        batch_size: 64,
        train_steps: 6000,
        epsilon: 1.0,
        momentum: Some(0.9),
        sequential: false,
        seed: 1,
    };
    let outcome = train(&buffer, &arch, &cfg)?;
    println!(
        "trained {} iterations; batch loss {:.4} -> {:.6}",
        outcome.loss_history.len(),
        outcome.loss_history[0],
        outcome.loss_history.last().unwrap()
    );

    let agent = run_agent_episode(&outcome.policy, &config, config.seed)?;
    println!(
        "agent total reward:  {:.3}  actions {:?}",
        agent.total_reward, agent.actions
    );

    let regret = (oracle.total_reward - agent.total_reward) / oracle.total_reward.abs();
    println!("relative regret vs oracle: {:.4}", regret);
    Ok(())
}
