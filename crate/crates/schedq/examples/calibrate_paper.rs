//! Scratch calibration for the desk-scale paper-shaped experiment.

use anyhow::Result;

use schedq::env::{generate_env_suite, SuiteRanges};
use schedq::eval::build_report;
use schedq::nn::NetArchitecture;
use schedq::qlearn::{collect_samples, train, TrainConfig};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let master_seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let train_steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(8000);
    let step_size: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let gamma: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.97);
    let episodes_per_env: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(25);
    let epsilon: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.5);

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
    for (i, cfg) in suite.iter().enumerate() {
        println!(
            "env {i}: sigma_w={:.3} sigma_p={:.3} buffers {:.1?}",
            cfg.sigma_w,
            cfg.sigma_p,
            cfg.initial_buffers.iter().sum::<f64>()
        );
    }

    let t0 = std::time::Instant::now();
    let buffer = collect_samples(&suite, episodes_per_env, epsilon, master_seed ^ 0x5eed, 200_000)?;
    println!("collected {} transitions in {:.0?}", buffer.len(), t0.elapsed());

    let arch = NetArchitecture::test_profile_for(10);
    use rayon::prelude::*;
    let t0 = std::time::Instant::now();
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
                seed: 100 + agent_seed,
            };
            let outcome = train(&buffer, &arch, &cfg).expect("training");
            println!(
                "agent {agent_seed}: loss {:.4} -> {:.4}",
                outcome.loss_history[0],
                outcome.loss_history.last().unwrap(),
            );
            outcome.policy
        })
        .collect();
    println!("trained 4 agents in {:.0?}", t0.elapsed());

    let t0 = std::time::Instant::now();
    let report = build_report(&suite, &agents, 20, master_seed ^ 0xe7a1)?;
    println!("evaluated in {:.0?}", t0.elapsed());
    let mut wins = 0;
    let mut best_adv = i32::MIN;
    for row in &report.rows {
        let win = row.best_agent_mean >= row.greedy_mean;
        wins += win as usize;
        best_adv = best_adv.max(row.advantage_percent);
        println!(
            "env {}: greedy {:.1} | agents {:?} | best {:.1} | advantage {:+}% {}",
            row.env_id,
            row.greedy_mean,
            row.agent_means.iter().map(|m| (m * 10.0).round() / 10.0).collect::<Vec<_>>(),
            row.best_agent_mean,
            row.advantage_percent,
            if win { "WIN" } else { "lose" }
        );
    }
    println!(
        "summary: wins {wins}/4, best advantage {best_adv:+}% (need >=3 wins and >=+10%)"
    );

    // behavior trace: best agent vs greedy on each env, first steps
    use schedq::baseline::greedy_action;
    use schedq::env::EnvState;
    use schedq::qlearn::act;
    for (ei, config) in suite.iter().enumerate() {
        let row = &report.rows[ei];
        let agent = &agents[row.best_agent];
        let mut s_agent = EnvState::reset(&config.with_seed(12345))?;
        let mut s_greedy = EnvState::reset(&config.with_seed(12345))?;
        let mut agent_line = String::new();
        let mut greedy_line = String::new();
        for _ in 0..18 {
            if s_agent.is_terminal() || s_greedy.is_terminal() {
                break;
            }
            let ua = act(agent, &s_agent)?;
            let pa = s_agent.penalty(ua)?;
            s_agent.step(ua)?;
            agent_line.push_str(&format!("{ua}({pa:.2}) "));
            let ug = greedy_action(&s_greedy)?;
            let pg = s_greedy.penalty(ug)?;
            s_greedy.step(ug)?;
            greedy_line.push_str(&format!("{ug}({pg:.2}) "));
        }
        println!("env {ei} agent : {agent_line}");
        println!("env {ei} greedy: {greedy_line}");
    }
    Ok(())
}
