//! Greedy baseline policy and an exhaustive-search oracle.
//!
//! The greedy policy serves, at every step, the eligible user with the
//! smallest switching penalty against the recent history. Penalties are
//! stored as nonnegative magnitudes and rewards negate them, so minimizing
//! the instantaneous penalty is the same as maximizing the instantaneous
//! reward.
//!
//! The oracle enumerates every serving order of a *static* environment
//! (memoizing on remaining work and history) and returns a maximum-reward
//! sequence. It exists to put a ceiling over the greedy baseline and trained
//! agents on small instances; stochastic environments are out of its scope.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, EnvState};
use crate::error::{Error, Result};

/// Per-episode trace: the actions taken, the reward collected at each step,
/// and their total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub total_reward: f64,
    pub steps: usize,
}

impl EpisodeResult {
    fn from_trace(actions: Vec<usize>, rewards: Vec<f64>) -> Self {
        let total_reward = rewards.iter().sum();
        let steps = actions.len();
        debug_assert_eq!(actions.len(), rewards.len());
        EpisodeResult {
            actions,
            rewards,
            total_reward,
            steps,
        }
    }
}

/// The eligible user with the smallest switching penalty right now, ties
/// broken by lowest index.
pub fn greedy_action(state: &EnvState) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for user in state.eligible_actions() {
        let p = state.penalty(user)?;
        match best {
            Some((_, bp)) if p >= bp => {}
            _ => best = Some((user, p)),
        }
    }
    best.map(|(user, _)| user).ok_or(Error::NoAction)
}

/// Runs one full greedy episode. Deterministic in the config.
pub fn run_greedy_episode(config: &EnvConfig) -> Result<EpisodeResult> {
    let mut state = EnvState::reset(config)?;
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    while !state.is_terminal() {
        let user = greedy_action(&state)?;
        let out = state.step(user)?;
        actions.push(user);
        rewards.push(out.reward);
    }
    Ok(EpisodeResult::from_trace(actions, rewards))
}

/// Default exploration budget for [`brute_force_optimal`].
pub const DEFAULT_ORACLE_BUDGET: usize = 2_000_000;

/// Exhaustive search for a maximum-total-reward serving order.
///
/// Only static configs (`sigma_w == sigma_p == 0`) are supported: with fixed
/// weights the buffer vector is a function of per-user serve counts, so the
/// search memoizes on `(remaining serve counts, history)`. `node_budget`
/// bounds the number of search states explored; exceeding it aborts with an
/// infeasibility error rather than running unbounded.
pub fn brute_force_optimal(config: &EnvConfig, node_budget: usize) -> Result<EpisodeResult> {
    config.validate()?;
    if !config.is_static() {
        return Err(Error::UnsupportedConfig(format!(
            "oracle requires sigma_w = sigma_p = 0, got sigma_w={}, sigma_p={}",
            config.sigma_w, config.sigma_p
        )));
    }

    // Serves needed to drain each buffer at the static weight.
    let serves: Vec<u32> = config
        .initial_buffers
        .iter()
        .zip(&config.initial_weights)
        .map(|(&b, &w)| (b / w).ceil() as u32)
        .collect();
    let total_serves: u64 = serves.iter().map(|&s| s as u64).sum();
    if total_serves > config.max_steps as u64 {
        return Err(Error::UnsupportedConfig(format!(
            "max_steps {} truncates the episode before all {} serves finish",
            config.max_steps, total_serves
        )));
    }
    // Coarse feasibility check before searching: number of memo states.
    let mut state_estimate: u128 = 1;
    for &s in &serves {
        state_estimate = state_estimate.saturating_mul(s as u128 + 1);
    }
    let history_estimate =
        (config.n_users as u128).saturating_pow(config.memory_window as u32) + 1;
    if state_estimate.saturating_mul(history_estimate) > node_budget as u128 {
        return Err(Error::OracleInfeasible(format!(
            "estimated {} search states exceed the budget of {node_budget}",
            state_estimate.saturating_mul(history_estimate)
        )));
    }

    let mut search = OracleSearch {
        penalty: &config.initial_penalty_matrix,
        memory_window: config.memory_window,
        memo: HashMap::new(),
        nodes: 0,
        budget: node_budget,
    };
    search.best_from(&mut serves.clone(), &mut Vec::new())?;

    // Replay the memoized best actions through the real simulator so the
    // returned trace carries actual rewards.
    let mut remaining = serves;
    let mut history: Vec<usize> = Vec::new();
    let mut state = EnvState::reset(config)?;
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    while remaining.iter().any(|&r| r > 0) {
        let key = (remaining.clone(), history.clone());
        let (_, action) = search.memo[&key];
        let user = action.expect("non-terminal memo entry must carry an action");
        let out = state.step(user)?;
        actions.push(user);
        rewards.push(out.reward);
        remaining[user] -= 1;
        history.insert(0, user);
        history.truncate(config.memory_window);
    }
    debug_assert!(state.is_terminal());
    Ok(EpisodeResult::from_trace(actions, rewards))
}

type MemoKey = (Vec<u32>, Vec<usize>);

struct OracleSearch<'a> {
    penalty: &'a [Vec<f64>],
    memory_window: usize,
    /// (best achievable future reward, best first action) per state.
    memo: HashMap<MemoKey, (f64, Option<usize>)>,
    nodes: usize,
    budget: usize,
}

impl OracleSearch<'_> {
    fn best_from(&mut self, remaining: &mut Vec<u32>, history: &mut Vec<usize>) -> Result<f64> {
        if remaining.iter().all(|&r| r == 0) {
            return Ok(0.0);
        }
        let key = (remaining.clone(), history.clone());
        if let Some(&(value, _)) = self.memo.get(&key) {
            return Ok(value);
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::OracleInfeasible(format!(
                "node budget of {} exhausted",
                self.budget
            )));
        }

        let mut best_value = f64::NEG_INFINITY;
        let mut best_action = None;
        for user in 0..remaining.len() {
            if remaining[user] == 0 {
                continue;
            }
            let reward: f64 = -history.iter().map(|&h| self.penalty[user][h]).sum::<f64>();

            let saved_history = history.clone();
            remaining[user] -= 1;
            history.insert(0, user);
            history.truncate(self.memory_window);
            let value = reward + self.best_from(remaining, history)?;
            *history = saved_history;
            remaining[user] += 1;

            if value > best_value {
                best_value = value;
                best_action = Some(user);
            }
        }
        self.memo.insert(key, (best_value, best_action));
        Ok(best_value)
    }
}
