//! Evaluation harness: agent episodes, the advantage metric, kernel density
//! estimates of agent reward distributions, and the aggregate report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{self, EpisodeResult};
use crate::env::{EnvConfig, EnvState};
use crate::error::{Error, Result};
use crate::nn::QNetwork;
use crate::qlearn;
use crate::seeds;

/// Runs one episode driven by the network's masked argmax policy, with the
/// environment reseeded by `seed`.
pub fn run_agent_episode(net: &QNetwork, config: &EnvConfig, seed: u64) -> Result<EpisodeResult> {
    let arch = net.architecture();
    if arch.output_dim != config.n_users || arch.input_dim != config.state_dim() {
        return Err(Error::InvalidArgument(format!(
            "network shape {}->{} does not match env with {} users (state dim {})",
            arch.input_dim,
            arch.output_dim,
            config.n_users,
            config.state_dim()
        )));
    }
    let mut state = EnvState::reset(&config.with_seed(seed))?;
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    while !state.is_terminal() {
        let user = qlearn::act(net, &state)?;
        let out = state.step(user)?;
        actions.push(user);
        rewards.push(out.reward);
    }
    let total_reward = rewards.iter().sum();
    let steps = actions.len();
    Ok(EpisodeResult {
        actions,
        rewards,
        total_reward,
        steps,
    })
}

/// Percentage improvement of the agent over greedy,
/// `100 * (agent - greedy) / |agent|`, truncated toward zero to integer
/// percent. Truncation (not rounding half away) is what reproduces every
/// published advantage figure from the raw reward pairs.
pub fn advantage(greedy_reward: f64, agent_reward: f64) -> Result<i32> {
    if agent_reward == 0.0 {
        return Err(Error::UndefinedMetric(
            "advantage is undefined when the agent reward is zero".to_string(),
        ));
    }
    let pct = 100.0 * (agent_reward - greedy_reward) / agent_reward.abs();
    Ok(pct.trunc() as i32)
}

/// A kernel density estimate over total-reward samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    /// Ascending evaluation grid on the total-reward axis.
    pub grid: Vec<f64>,
    /// Density at each grid point.
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

/// Gaussian-kernel density estimator with Silverman's bandwidth
/// `h = 0.9 * min(std, IQR/1.34) * n^(-1/5)`, floored at a small positive
/// epsilon so degenerate data (a single sample, identical samples) still
/// yields a curve.
#[derive(Debug, Clone)]
pub struct Kde {
    samples: Vec<f64>,
    bandwidth: f64,
}

/// Floor for degenerate bandwidths.
pub const KDE_MIN_BANDWIDTH: f64 = 1e-9;

impl Kde {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument(
                "kde needs at least one sample".to_string(),
            ));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "kde samples must be finite".to_string(),
            ));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std = if samples.len() > 1 {
            (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
        let bandwidth = (0.9 * std.min(iqr / 1.34) * n.powf(-0.2)).max(KDE_MIN_BANDWIDTH);
        Ok(Kde {
            samples: samples.to_vec(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Density at `x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (self.samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        self.samples
            .iter()
            .map(|&xi| {
                let z = (x - xi) / h;
                (-0.5 * z * z).exp()
            })
            .sum::<f64>()
            * norm
    }

    /// Evaluates the density on a uniform grid spanning the data range
    /// widened by four bandwidths on each side.
    pub fn curve(&self, grid_points: usize) -> Result<KdeCurve> {
        if grid_points < 2 {
            return Err(Error::InvalidArgument(
                "kde grid needs at least two points".to_string(),
            ));
        }
        let lo = self.samples.iter().cloned().fold(f64::INFINITY, f64::min)
            - 4.0 * self.bandwidth;
        let hi = self.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            + 4.0 * self.bandwidth;
        let step = (hi - lo) / (grid_points - 1) as f64;
        let grid: Vec<f64> = (0..grid_points).map(|i| lo + i as f64 * step).collect();
        let density = grid.iter().map(|&x| self.evaluate(x)).collect();
        Ok(KdeCurve {
            grid,
            density,
            bandwidth: self.bandwidth,
        })
    }
}

/// Convenience wrapper: fit a KDE to `samples` and evaluate it on a grid.
pub fn kde(samples: &[f64], grid_points: usize) -> Result<KdeCurve> {
    Kde::new(samples)?.curve(grid_points)
}

/// Linear-interpolated quantile of `sorted` ascending data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

impl KdeCurve {
    /// Trapezoidal integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(g, d)| 0.5 * (d[0] + d[1]) * (g[1] - g[0]))
            .sum()
    }
}

/// One row of the aggregate report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvReportRow {
    pub env_id: usize,
    /// Greedy mean total reward over the evaluation episodes.
    pub greedy_mean: f64,
    pub greedy_episode_totals: Vec<f64>,
    /// Mean total reward per agent, one entry per trained seed.
    pub agent_means: Vec<f64>,
    /// Per-agent per-episode totals (same episode seeds as greedy).
    pub agent_episode_totals: Vec<Vec<f64>>,
    /// Index into `agent_means` of the best agent.
    pub best_agent: usize,
    pub best_agent_mean: f64,
    /// Best single evaluation episode over all agents.
    pub best_single_episode: f64,
    /// Advantage of the best agent's mean over the greedy mean.
    pub advantage_percent: i32,
    /// Density of the per-agent mean rewards.
    pub kde: KdeCurve,
}

/// Aggregate evaluation of a suite of environments by a set of agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EnvReportRow>,
    pub episodes_per_eval: usize,
    pub seed: u64,
}

const REPORT_KDE_GRID_POINTS: usize = 256;

/// Evaluates every agent and the greedy baseline on every environment.
///
/// For each environment, `episodes_per_eval` fresh episode seeds are derived
/// from `seed`; greedy and every agent face the same reseeded episodes. Each
/// row records the per-policy means, the best agent, and its advantage over
/// greedy.
pub fn build_report(
    suite: &[EnvConfig],
    agents: &[QNetwork],
    episodes_per_eval: usize,
    seed: u64,
) -> Result<EvalReport> {
    if suite.is_empty() || agents.is_empty() || episodes_per_eval == 0 {
        return Err(Error::InvalidArgument(
            "build_report needs a nonempty suite, at least one agent, and episodes_per_eval > 0"
                .to_string(),
        ));
    }

    let rows: Vec<Result<EnvReportRow>> = suite
        .par_iter()
        .enumerate()
        .map(|(env_idx, config)| build_row(env_idx, config, agents, episodes_per_eval, seed))
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(EvalReport {
        rows,
        episodes_per_eval,
        seed,
    })
}

fn build_row(
    env_idx: usize,
    config: &EnvConfig,
    agents: &[QNetwork],
    episodes_per_eval: usize,
    seed: u64,
) -> Result<EnvReportRow> {
    let episode_seeds: Vec<u64> = (0..episodes_per_eval)
        .map(|e| seeds::derive(seed, (env_idx * episodes_per_eval + e) as u64))
        .collect();

    let greedy_episode_totals: Vec<f64> = episode_seeds
        .iter()
        .map(|&s| {
            baseline::run_greedy_episode(&config.with_seed(s)).map(|r| r.total_reward)
        })
        .collect::<Result<_>>()?;

    let agent_episode_totals: Vec<Vec<f64>> = agents
        .iter()
        .map(|net| {
            episode_seeds
                .iter()
                .map(|&s| run_agent_episode(net, config, s).map(|r| r.total_reward))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let greedy_mean = mean(&greedy_episode_totals);
    let agent_means: Vec<f64> = agent_episode_totals.iter().map(|t| mean(t)).collect();

    let best_agent = agent_means
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .expect("agents is nonempty");
    let best_agent_mean = agent_means[best_agent];
    let best_single_episode = agent_episode_totals
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    let advantage_percent = advantage(greedy_mean, best_agent_mean)?;
    let kde = kde(&agent_means, REPORT_KDE_GRID_POINTS)?;

    Ok(EnvReportRow {
        env_id: env_idx + 1,
        greedy_mean,
        greedy_episode_totals,
        agent_means,
        agent_episode_totals,
        best_agent,
        best_agent_mean,
        best_single_episode,
        advantage_percent,
        kde,
    })
}
