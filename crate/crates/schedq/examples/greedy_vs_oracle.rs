//! Compare the greedy baseline against the exhaustive oracle on small
//! static instances.
//!
//! Run with: `cargo run --release --example greedy_vs_oracle`

use anyhow::Result;

use schedq::baseline::{brute_force_optimal, run_greedy_episode, DEFAULT_ORACLE_BUDGET};
use schedq::env::{generate_env_suite, SuiteRanges};

fn main() -> Result<()> {
    let ranges = SuiteRanges {
        n_users: 4,
        buffer_range: (1.0, 4.0),
        weight_range: (1.0, 2.0),
        penalty_range: (0.0, 1.0),
        sigma_w_range: (0.0, 0.0),
        sigma_p_range: (0.0, 0.0),
        memory_window: 2,
        max_steps: 50,
        normalize_state: true,
    };
    let suite = generate_env_suite(2024, 20, &ranges)?;

    let mut greedy_total = 0.0;
    let mut oracle_total = 0.0;
    let mut ties = 0;
    println!("{:>4} {:>12} {:>12} {:>8}", "env", "greedy", "oracle", "gap");
    for (i, config) in suite.iter().enumerate() {
        let greedy = run_greedy_episode(config)?;
        let oracle = brute_force_optimal(config, DEFAULT_ORACLE_BUDGET)?;
        let gap = oracle.total_reward - greedy.total_reward;
        assert!(gap >= -1e-9, "oracle can never lose to greedy");
        if gap.abs() < 1e-9 {
            ties += 1;
        }
        greedy_total += greedy.total_reward;
        oracle_total += oracle.total_reward;
        println!(
            "{i:>4} {:>12.4} {:>12.4} {:>8.4}",
            greedy.total_reward, oracle.total_reward, gap
        );
    }
    println!(
        "\ngreedy mean {:.4}, oracle mean {:.4}; greedy matched the optimum in {ties}/20 instances",
        greedy_total / 20.0,
        oracle_total / 20.0
    );
    println!("myopia costs greedy {:.1}% on average", 100.0 * (oracle_total - greedy_total) / oracle_total.abs());
    Ok(())
}
