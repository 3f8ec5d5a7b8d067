//! Tour of the scheduling environment: penalties, steps, drift, and the
//! observation vector.
//!
//! Run with: `cargo run --example penalty_dynamics`

use anyhow::Result;

use schedq::env::{generate_env_suite, EnvConfig, EnvState, SuiteRanges};

fn main() -> Result<()> {
    // A hand-written three-user environment with mild penalty drift.
    let config = EnvConfig {
        n_users: 3,
        initial_buffers: vec![4.0, 6.0, 2.0],
        initial_weights: vec![2.0, 2.0, 1.0],
        initial_penalty_matrix: vec![
            vec![0.0, 0.8, 0.3],
            vec![0.5, 0.0, 0.2],
            vec![0.9, 0.4, 0.0],
        ],
        memory_window: 2,
        sigma_w: 0.0,
        sigma_p: 0.05,
        w_bounds: (1.0, 3.0),
        p_max: 1.0,
        max_steps: 100,
        seed: 42,
        normalize_state: true,
    };

    let mut state = EnvState::reset(&config)?;
    println!(
        "reset: {} users, state vector of length {}",
        config.n_users,
        state.state_vector().len()
    );

    // Serve users round-robin and watch the switching penalties arrive once
    // the history fills up.
    let mut total = 0.0;
    let mut t = 0;
    while !state.is_terminal() {
        let user = state.eligible_actions()[t % state.eligible_actions().len()];
        let penalty = state.penalty(user)?;
        let out = state.step(user)?;
        total += out.reward;
        println!(
            "t={t}: served {user} (penalty {penalty:.3}), buffers {:?}, history {:?}",
            state
                .buffers()
                .iter()
                .map(|b| (b * 10.0).round() / 10.0)
                .collect::<Vec<_>>(),
            state.history().collect::<Vec<_>>(),
        );
        t += 1;
    }
    println!("episode over after {t} steps, total reward {total:.3}\n");

    // Drift: the penalty matrix after the episode is no longer the initial
    // one (sigma_p > 0), but stays inside [0, p_max] with a zero diagonal.
    println!("penalty matrix after drift:");
    for row in state.penalty_matrix() {
        println!(
            "  {:?}",
            row.iter().map(|p| (p * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }

    // Suites: draw a batch of randomized ten-user environments the way the
    // evaluation harness does.
    let suite = generate_env_suite(123, 4, &SuiteRanges::default())?;
    println!("\ngenerated a suite of {} ten-user environments:", suite.len());
    for (i, cfg) in suite.iter().enumerate() {
        println!(
            "  env {i}: sigma_w={:.3}, sigma_p={:.3}, total buffered data {:.1}",
            cfg.sigma_w,
            cfg.sigma_p,
            cfg.initial_buffers.iter().sum::<f64>()
        );
    }
    Ok(())
}
