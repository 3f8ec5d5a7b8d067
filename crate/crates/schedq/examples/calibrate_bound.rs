//! Scratch: how much can planning gain over greedy on the desk-scale suite?
//! Beam search with full history knowledge, frozen dynamics, as an upper
//! envelope for memoryless policies.

use anyhow::Result;

use schedq::baseline::run_greedy_episode;
use schedq::env::{generate_env_suite, EnvConfig, EnvState, SuiteRanges};

#[derive(Clone)]
struct Node {
    buffers: Vec<f64>,
    history: Vec<usize>,
    total: f64,
}

/// Beam search over serving orders with the penalty matrix and weights
/// frozen at their initial values.
fn beam_plan(config: &EnvConfig, beam_width: usize) -> f64 {
    let p = &config.initial_penalty_matrix;
    let w = &config.initial_weights;
    let mut beam = vec![Node {
        buffers: config.initial_buffers.clone(),
        history: vec![],
        total: 0.0,
    }];
    loop {
        let mut next: Vec<Node> = Vec::new();
        let mut any_expanded = false;
        for node in &beam {
            let eligible: Vec<usize> =
                (0..config.n_users).filter(|&i| node.buffers[i] > 0.0).collect();
            if eligible.is_empty() {
                next.push(node.clone());
                continue;
            }
            any_expanded = true;
            for &user in &eligible {
                let penalty: f64 = node.history.iter().map(|&h| p[user][h]).sum();
                let mut buffers = node.buffers.clone();
                buffers[user] = (buffers[user] - w[user]).max(0.0);
                let mut history = node.history.clone();
                history.insert(0, user);
                history.truncate(config.memory_window);
                next.push(Node {
                    buffers,
                    history,
                    total: node.total - penalty,
                });
            }
        }
        if !any_expanded {
            break;
        }
        next.sort_by(|a, b| b.total.partial_cmp(&a.total).unwrap());
        next.truncate(beam_width);
        beam = next;
    }
    beam[0].total
}

/// Replay a planned action order in the real (drifting) environment.
fn beam_plan_actions(config: &EnvConfig, beam_width: usize) -> Vec<usize> {
    let p = &config.initial_penalty_matrix;
    let w = &config.initial_weights;
    #[derive(Clone)]
    struct NodeA {
        buffers: Vec<f64>,
        history: Vec<usize>,
        total: f64,
        actions: Vec<usize>,
    }
    let mut beam = vec![NodeA {
        buffers: config.initial_buffers.clone(),
        history: vec![],
        total: 0.0,
        actions: vec![],
    }];
    loop {
        let mut next: Vec<NodeA> = Vec::new();
        let mut any = false;
        for node in &beam {
            let eligible: Vec<usize> =
                (0..config.n_users).filter(|&i| node.buffers[i] > 0.0).collect();
            if eligible.is_empty() {
                next.push(node.clone());
                continue;
            }
            any = true;
            for &user in &eligible {
                let penalty: f64 = node.history.iter().map(|&h| p[user][h]).sum();
                let mut buffers = node.buffers.clone();
                buffers[user] = (buffers[user] - w[user]).max(0.0);
                let mut history = node.history.clone();
                history.insert(0, user);
                history.truncate(config.memory_window);
                let mut actions = node.actions.clone();
                actions.push(user);
                next.push(NodeA {
                    buffers,
                    history,
                    total: node.total - penalty,
                    actions,
                });
            }
        }
        if !any {
            break;
        }
        next.sort_by(|a, b| b.total.partial_cmp(&a.total).unwrap());
        next.truncate(beam_width);
        beam = next;
    }
    beam[0].actions.clone()
}

fn main() -> Result<()> {
    let variants: Vec<(&str, (f64, f64), (f64, f64))> = vec![
        ("narrow", (3.0, 12.0), (1.0, 3.0)),
        ("wide", (2.0, 18.0), (1.0, 3.0)),
        ("vwide", (1.0, 24.0), (1.0, 2.0)),
    ];
    for (name, buffer_range, weight_range) in variants {
        for master_seed in [1u64, 3, 5, 7, 11, 13] {
            let ranges = SuiteRanges {
                n_users: 10,
                buffer_range,
                weight_range,
                penalty_range: (0.0, 1.0),
                sigma_w_range: (0.002, 0.015),
                sigma_p_range: (0.002, 0.015),
                memory_window: 2,
                max_steps: 400,
                normalize_state: false,
            };
            let suite = generate_env_suite(master_seed, 4, &ranges)?;
            let mut gaps = Vec::new();
            for config in &suite {
                let greedy = run_greedy_episode(config)?;
                let actions = beam_plan_actions(config, 400);
                let mut state = EnvState::reset(config)?;
                let mut replay_total = 0.0;
                for &u in &actions {
                    if state.is_terminal() || state.buffers()[u] <= 0.0 {
                        break;
                    }
                    replay_total += state.step(u)?.reward;
                }
                gaps.push(
                    (100.0 * (replay_total - greedy.total_reward) / replay_total.abs()).round(),
                );
            }
            println!("{name} seed {master_seed}: beam-vs-greedy gaps {gaps:?}");
        }
    }
    Ok(())
}
