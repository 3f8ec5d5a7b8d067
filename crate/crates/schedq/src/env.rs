//! The user-scheduling MDP.
//!
//! A single transmitter serves `N` users. Each user starts with a buffer of
//! data to deliver; serving user `i` for one time step drains `weights[i]`
//! data units from that buffer. Choosing user `i` incurs a switching penalty
//! against every user served during the last `memory_window` steps:
//!
//! ```text
//! penalty(i) = sum over h in history of P[i][h]
//! ```
//!
//! Rewards are the negated penalties, so an episode's total reward is a
//! non-positive number and the scheduling objective is to maximize it. An
//! episode ends when every buffer is empty (or at the `max_steps` safety
//! bound).
//!
//! Both the weight vector and the penalty matrix may drift between steps as
//! clipped Brownian motion; the drift scales `sigma_w` / `sigma_p` are zero
//! for a static environment.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

/// Full generative description of one environment.
///
/// Serializes to JSON with the field names below; the penalty matrix is a
/// list of rows (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Number of users `N`.
    pub n_users: usize,
    /// Data units awaiting transmission per user at t=0.
    pub initial_buffers: Vec<f64>,
    /// Data units transmitted per serving step, per user, at t=0.
    pub initial_weights: Vec<f64>,
    /// N x N switching-penalty matrix at t=0. Zero diagonal.
    pub initial_penalty_matrix: Vec<Vec<f64>>,
    /// How many most recent served users interfere with the current choice.
    #[serde(default = "default_memory_window")]
    pub memory_window: usize,
    /// Brownian step scale for the weight vector.
    pub sigma_w: f64,
    /// Brownian step scale for the penalty matrix.
    pub sigma_p: f64,
    /// Weights are clipped into `[w_bounds.0, w_bounds.1]`; the lower bound
    /// must be positive so every episode terminates.
    pub w_bounds: (f64, f64),
    /// Penalty entries are clipped into `[0, p_max]`.
    pub p_max: f64,
    /// Safety bound on episode length.
    pub max_steps: usize,
    /// Seed for the environment's own random stream.
    pub seed: u64,
    /// When true (the default), observation vectors normalize buffers by
    /// their initial values and penalties by `p_max`; when false they carry
    /// the raw values.
    #[serde(default = "default_normalize_state")]
    pub normalize_state: bool,
}

fn default_memory_window() -> usize {
    2
}

fn default_normalize_state() -> bool {
    true
}

impl EnvConfig {
    /// Dimension of the observation vector: `N + N^2`.
    pub fn state_dim(&self) -> usize {
        self.n_users + self.n_users * self.n_users
    }

    /// Checks every config invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let n = self.n_users;
        if n == 0 {
            problems.push("n_users must be positive".to_string());
        }
        if self.initial_buffers.len() != n {
            problems.push(format!(
                "initial_buffers has length {}, expected {n}",
                self.initial_buffers.len()
            ));
        }
        if self.initial_weights.len() != n {
            problems.push(format!(
                "initial_weights has length {}, expected {n}",
                self.initial_weights.len()
            ));
        }
        if self.initial_penalty_matrix.len() != n
            || self.initial_penalty_matrix.iter().any(|row| row.len() != n)
        {
            problems.push(format!("initial_penalty_matrix is not {n}x{n}"));
        }
        if self.initial_buffers.iter().any(|b| !b.is_finite() || *b < 0.0) {
            problems.push("initial_buffers must be finite and nonnegative".to_string());
        }
        let (w_min, w_max) = self.w_bounds;
        if !(w_min > 0.0) || !w_min.is_finite() {
            problems.push("w_bounds lower bound must be positive".to_string());
        }
        if !(w_max >= w_min) {
            problems.push("w_bounds must satisfy w_min <= w_max".to_string());
        }
        if self
            .initial_weights
            .iter()
            .any(|w| !w.is_finite() || *w < w_min || *w > w_max)
        {
            problems.push("initial_weights must lie within w_bounds".to_string());
        }
        if !(self.p_max > 0.0) || !self.p_max.is_finite() {
            problems.push("p_max must be positive".to_string());
        }
        for (i, row) in self.initial_penalty_matrix.iter().enumerate() {
            if row.len() != n {
                continue;
            }
            for (j, &p) in row.iter().enumerate() {
                if i == j && p != 0.0 {
                    problems.push(format!("initial_penalty_matrix[{i}][{i}] must be zero"));
                } else if !p.is_finite() || p < 0.0 || p > self.p_max {
                    problems.push(format!(
                        "initial_penalty_matrix[{i}][{j}] = {p} outside [0, p_max]"
                    ));
                }
            }
        }
        if self.memory_window == 0 {
            problems.push("memory_window must be positive".to_string());
        }
        if self.sigma_w < 0.0 || !self.sigma_w.is_finite() {
            problems.push("sigma_w must be nonnegative".to_string());
        }
        if self.sigma_p < 0.0 || !self.sigma_p.is_finite() {
            problems.push("sigma_p must be nonnegative".to_string());
        }
        if self.max_steps == 0 {
            problems.push("max_steps must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    /// Copy of this config with a different environment seed. Evaluation and
    /// sample collection use this to run fresh episodes of the same
    /// environment.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.seed = seed;
        cfg
    }

    /// True when both drift scales are zero.
    pub fn is_static(&self) -> bool {
        self.sigma_w == 0.0 && self.sigma_p == 0.0
    }
}

/// Result of one simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Negated switching penalty of the chosen action (always <= 0).
    pub reward: f64,
    /// Observation vector of the post-transition state.
    pub next_state_vector: Vec<f64>,
    /// True when every buffer is empty or the step bound was reached.
    pub terminal: bool,
}

/// Live simulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    config: EnvConfig,
    buffers: Vec<f64>,
    weights: Vec<f64>,
    penalty_matrix: Vec<Vec<f64>>,
    /// Up to `memory_window` most recently served users, most recent first.
    history: VecDeque<usize>,
    t: usize,
    rng: ChaCha8Rng,
}

impl EnvState {
    /// Starts a fresh episode from `config`.
    pub fn reset(config: &EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(EnvState {
            buffers: config.initial_buffers.clone(),
            weights: config.initial_weights.clone(),
            penalty_matrix: config.initial_penalty_matrix.clone(),
            history: VecDeque::with_capacity(config.memory_window),
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn buffers(&self) -> &[f64] {
        &self.buffers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn penalty_matrix(&self) -> &[Vec<f64>] {
        &self.penalty_matrix
    }

    /// Most recently served users, most recent first.
    pub fn history(&self) -> impl Iterator<Item = usize> + '_ {
        self.history.iter().copied()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Switching penalty of serving `user` now: the sum of `P[user][h]` over
    /// every slot `h` of the history. Early in an episode the history is
    /// shorter than `memory_window` and the sum simply has fewer terms;
    /// repeated entries are counted once per slot.
    pub fn penalty(&self, user: usize) -> Result<f64> {
        if user >= self.config.n_users {
            return Err(Error::InvalidArgument(format!(
                "user index {user} out of range for {} users",
                self.config.n_users
            )));
        }
        let row = &self.penalty_matrix[user];
        Ok(self.history.iter().map(|&h| row[h]).sum())
    }

    /// Users that still have data queued. Empty exactly when the state is
    /// terminal (after the step bound is hit no user is eligible even if
    /// data remains).
    pub fn eligible_actions(&self) -> Vec<usize> {
        if self.t >= self.config.max_steps {
            return Vec::new();
        }
        (0..self.config.n_users)
            .filter(|&i| self.buffers[i] > 0.0)
            .collect()
    }

    /// True when every buffer is empty or `max_steps` was reached.
    pub fn is_terminal(&self) -> bool {
        self.t >= self.config.max_steps || self.buffers.iter().all(|&b| b == 0.0)
    }

    /// Serves `user` for one time step.
    ///
    /// The reward is the negated penalty of the choice, the served buffer is
    /// drained by the user's current weight (clamped at zero), the user is
    /// pushed onto the history, and the dynamics advance once.
    pub fn step(&mut self, user: usize) -> Result<StepOutcome> {
        if user >= self.config.n_users {
            return Err(Error::InvalidArgument(format!(
                "user index {user} out of range for {} users",
                self.config.n_users
            )));
        }
        if self.t >= self.config.max_steps {
            return Err(Error::IllegalAction {
                user,
                reason: "episode already hit max_steps".to_string(),
            });
        }
        if self.buffers[user] <= 0.0 {
            return Err(Error::IllegalAction {
                user,
                reason: "buffer is empty".to_string(),
            });
        }

        let reward = -self.penalty(user)?;
        self.buffers[user] = (self.buffers[user] - self.weights[user]).max(0.0);
        self.history.push_front(user);
        self.history.truncate(self.config.memory_window);
        self.advance_dynamics();
        self.t += 1;

        Ok(StepOutcome {
            reward,
            next_state_vector: self.state_vector(),
            terminal: self.is_terminal(),
        })
    }

    /// One Brownian update of the weight vector and penalty matrix.
    ///
    /// Each weight moves by `sigma_w * xi` (standard normal `xi`) and is
    /// clipped into `w_bounds`; each off-diagonal penalty entry moves by
    /// `sigma_p * xi` and is clipped into `[0, p_max]`. The diagonal stays
    /// zero. Draw order is weights by index, then the matrix row-major.
    /// `step` already calls this once per step.
    pub fn advance_dynamics(&mut self) {
        let (w_min, w_max) = self.config.w_bounds;
        if self.config.sigma_w > 0.0 {
            for w in &mut self.weights {
                let xi: f64 = self.rng.sample(StandardNormal);
                *w = (*w + self.config.sigma_w * xi).clamp(w_min, w_max);
            }
        }
        if self.config.sigma_p > 0.0 {
            for (i, row) in self.penalty_matrix.iter_mut().enumerate() {
                for (j, p) in row.iter_mut().enumerate() {
                    if i == j {
                        continue;
                    }
                    let xi: f64 = self.rng.sample(StandardNormal);
                    *p = (*p + self.config.sigma_p * xi).clamp(0.0, self.config.p_max);
                }
            }
        }
    }

    /// Observation vector of length `N + N^2`: buffers followed by the
    /// penalty matrix row-major. With `normalize_state` set, buffers are
    /// divided by their initial values (zero-initial buffers map to 0) and
    /// penalties by `p_max`.
    pub fn state_vector(&self) -> Vec<f64> {
        let n = self.config.n_users;
        let mut v = Vec::with_capacity(n + n * n);
        if self.config.normalize_state {
            for i in 0..n {
                let b0 = self.config.initial_buffers[i];
                v.push(if b0 > 0.0 { self.buffers[i] / b0 } else { 0.0 });
            }
            for row in &self.penalty_matrix {
                for &p in row {
                    v.push(p / self.config.p_max);
                }
            }
        } else {
            v.extend_from_slice(&self.buffers);
            for row in &self.penalty_matrix {
                v.extend_from_slice(row);
            }
        }
        v
    }
}

/// Parameter ranges for [`generate_env_suite`]. Every initial value and
/// drift scale is drawn uniformly from its range; the drawn weight range
/// doubles as the clipping bounds and the penalty range's upper end becomes
/// `p_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRanges {
    pub n_users: usize,
    pub buffer_range: (f64, f64),
    pub weight_range: (f64, f64),
    pub penalty_range: (f64, f64),
    pub sigma_w_range: (f64, f64),
    pub sigma_p_range: (f64, f64),
    #[serde(default = "default_memory_window")]
    pub memory_window: usize,
    pub max_steps: usize,
    /// Observation mode for the generated configs; raw buffers carry the
    /// absolute work remaining, which scheduling policies need when users
    /// start with very different loads.
    #[serde(default = "default_normalize_state")]
    pub normalize_state: bool,
}

impl Default for SuiteRanges {
    /// Desk-scale defaults shaped like the paper's setup: ten users, drifting
    /// weights and penalties, episodes of a few dozen steps.
    fn default() -> Self {
        SuiteRanges {
            n_users: 10,
            buffer_range: (8.0, 20.0),
            weight_range: (1.0, 4.0),
            penalty_range: (0.0, 1.0),
            sigma_w_range: (0.01, 0.08),
            sigma_p_range: (0.01, 0.08),
            memory_window: 2,
            max_steps: 400,
            normalize_state: true,
        }
    }
}

impl SuiteRanges {
    fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_users == 0 {
            problems.push("n_users must be positive".to_string());
        }
        let pairs = [
            ("buffer_range", self.buffer_range),
            ("weight_range", self.weight_range),
            ("penalty_range", self.penalty_range),
            ("sigma_w_range", self.sigma_w_range),
            ("sigma_p_range", self.sigma_p_range),
        ];
        for (name, (lo, hi)) in pairs {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                problems.push(format!("{name} is empty or inverted: ({lo}, {hi})"));
            }
        }
        if self.weight_range.0 <= 0.0 {
            problems.push("weight_range lower bound must be positive".to_string());
        }
        if self.penalty_range.0 < 0.0 {
            problems.push("penalty_range lower bound must be nonnegative".to_string());
        }
        if self.penalty_range.1 <= 0.0 {
            problems.push("penalty_range upper bound must be positive".to_string());
        }
        if self.sigma_w_range.0 < 0.0 || self.sigma_p_range.0 < 0.0 {
            problems.push("drift scale ranges must be nonnegative".to_string());
        }
        if self.buffer_range.0 < 0.0 {
            problems.push("buffer_range lower bound must be nonnegative".to_string());
        }
        if self.memory_window == 0 {
            problems.push("memory_window must be positive".to_string());
        }
        if self.max_steps == 0 {
            problems.push("max_steps must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

/// Draws `count` environment configs with parameters uniform in `ranges`.
///
/// Deterministic in `master_seed`; each config gets its own derived seed.
pub fn generate_env_suite(
    master_seed: u64,
    count: usize,
    ranges: &SuiteRanges,
) -> Result<Vec<EnvConfig>> {
    ranges.validate()?;
    let mut suite = Vec::with_capacity(count);
    for idx in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(master_seed, idx as u64));
        let n = ranges.n_users;
        let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            }
        };

        let sigma_w = uniform(&mut rng, ranges.sigma_w_range);
        let sigma_p = uniform(&mut rng, ranges.sigma_p_range);
        let initial_buffers: Vec<f64> =
            (0..n).map(|_| uniform(&mut rng, ranges.buffer_range)).collect();
        let initial_weights: Vec<f64> =
            (0..n).map(|_| uniform(&mut rng, ranges.weight_range)).collect();
        let mut initial_penalty_matrix = vec![vec![0.0; n]; n];
        for (i, row) in initial_penalty_matrix.iter_mut().enumerate() {
            for (j, p) in row.iter_mut().enumerate() {
                if i != j {
                    *p = uniform(&mut rng, ranges.penalty_range);
                }
            }
        }

        let config = EnvConfig {
            n_users: n,
            initial_buffers,
            initial_weights,
            initial_penalty_matrix,
            memory_window: ranges.memory_window,
            sigma_w,
            sigma_p,
            w_bounds: ranges.weight_range,
            p_max: ranges.penalty_range.1,
            max_steps: ranges.max_steps,
            seed: seeds::derive(master_seed, (count + idx) as u64),
            normalize_state: ranges.normalize_state,
        };
        config.validate()?;
        suite.push(config);
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn static_config_3() -> EnvConfig {
        EnvConfig {
            n_users: 3,
            initial_buffers: vec![2.0, 2.0, 2.0],
            initial_weights: vec![1.0, 1.0, 1.0],
            initial_penalty_matrix: vec![
                vec![0.0, 0.5, 0.25],
                vec![1.0, 0.0, 0.75],
                vec![1.5, 0.25, 0.0],
            ],
            memory_window: 2,
            sigma_w: 0.0,
            sigma_p: 0.0,
            w_bounds: (0.5, 2.0),
            p_max: 2.0,
            max_steps: 100,
            seed: 7,
            normalize_state: true,
        }
    }

    #[test]
    fn penalty_zero_matrix() {
        let mut cfg = static_config_3();
        cfg.initial_penalty_matrix = vec![vec![0.0; 3]; 3];
        let mut state = EnvState::reset(&cfg).unwrap();
        state.step(0).unwrap();
        state.step(1).unwrap();
        for user in 0..3 {
            assert_eq!(state.penalty(user).unwrap(), 0.0);
        }
    }

    #[test]
    fn penalty_sums_history_row() {
        // history (0, 1), user 2: P[2][0] + P[2][1] = 1.5 + 0.25 = 1.75
        let cfg = static_config_3();
        let mut state = EnvState::reset(&cfg).unwrap();
        state.step(1).unwrap();
        state.step(0).unwrap();
        let hist: Vec<usize> = state.history().collect();
        assert_eq!(hist, vec![0, 1]);
        assert_eq!(state.penalty(2).unwrap(), 1.75);
    }

    #[test]
    fn penalty_repeated_self_service_is_zero() {
        // history (0, 0), user 0: zero diagonal twice.
        let cfg = static_config_3();
        let mut state = EnvState::reset(&cfg).unwrap();
        state.step(0).unwrap();
        state.step(0).unwrap();
        assert_eq!(state.penalty(0).unwrap(), 0.0);
    }

    #[test]
    fn penalty_out_of_range_user() {
        let state = EnvState::reset(&static_config_3()).unwrap();
        assert!(matches!(state.penalty(3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn reset_gives_empty_history_and_t0() {
        let state = EnvState::reset(&static_config_3()).unwrap();
        assert_eq!(state.history().count(), 0);
        assert_eq!(state.t(), 0);
    }

    #[test]
    fn reset_is_deterministic() {
        let cfg = static_config_3();
        let a = EnvState::reset(&cfg).unwrap();
        let b = EnvState::reset(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reset_rejects_nonzero_diagonal() {
        let mut cfg = static_config_3();
        cfg.initial_penalty_matrix[1][1] = 0.5;
        let err = EnvState::reset(&cfg).unwrap_err();
        assert!(err.to_string().contains("[1][1]"));
    }

    #[test]
    fn eligible_actions_mask_empty_buffers() {
        let mut cfg = static_config_3();
        cfg.initial_buffers = vec![0.0, 0.0, 5.0];
        let state = EnvState::reset(&cfg).unwrap();
        assert_eq!(state.eligible_actions(), vec![2]);

        cfg.initial_buffers = vec![0.0, 0.0, 0.0];
        let state = EnvState::reset(&cfg).unwrap();
        assert!(state.eligible_actions().is_empty());
        assert!(state.is_terminal());

        cfg.initial_buffers = vec![1.0, 1.0, 1.0];
        let state = EnvState::reset(&cfg).unwrap();
        assert_eq!(state.eligible_actions(), vec![0, 1, 2]);
    }

    #[test]
    fn step_clamps_buffer_at_zero() {
        let mut cfg = static_config_3();
        cfg.initial_buffers = vec![2.0, 0.0, 0.0];
        cfg.w_bounds = (0.5, 3.0);
        cfg.initial_weights = vec![3.0, 1.0, 1.0];
        let mut state = EnvState::reset(&cfg).unwrap();
        let out = state.step(0).unwrap();
        assert_eq!(state.buffers(), &[0.0, 0.0, 0.0]);
        assert!(out.terminal);
    }

    #[test]
    fn first_step_reward_is_zero() {
        let mut state = EnvState::reset(&static_config_3()).unwrap();
        let out = state.step(2).unwrap();
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn scripted_rewards_match_hand_computed_penalties() {
        // Serve 1 then 2 then 0:
        //   step 1: empty history, reward 0
        //   step 2: history (1), reward -P[2][1] = -0.25
        //   step 3: history (2,1), reward -(P[0][2] + P[0][1]) = -(0.25+0.5)
        let cfg = static_config_3();
        let mut state = EnvState::reset(&cfg).unwrap();
        assert_eq!(state.step(1).unwrap().reward, 0.0);
        assert_eq!(state.step(2).unwrap().reward, -0.25);
        assert_eq!(state.step(0).unwrap().reward, -0.75);
    }

    #[test]
    fn step_rejects_ineligible_user() {
        let mut cfg = static_config_3();
        cfg.initial_buffers = vec![1.0, 0.0, 1.0];
        let mut state = EnvState::reset(&cfg).unwrap();
        assert!(matches!(
            state.step(1),
            Err(Error::IllegalAction { user: 1, .. })
        ));
    }

    #[test]
    fn static_dynamics_leave_state_unchanged() {
        let cfg = static_config_3();
        let mut state = EnvState::reset(&cfg).unwrap();
        let before = state.clone();
        state.advance_dynamics();
        assert_eq!(state.weights(), before.weights());
        assert_eq!(state.penalty_matrix(), before.penalty_matrix());
    }

    #[test]
    fn dynamics_respect_bounds() {
        let mut cfg = static_config_3();
        cfg.sigma_w = 0.5;
        cfg.sigma_p = 0.5;
        let mut state = EnvState::reset(&cfg).unwrap();
        for _ in 0..200 {
            state.advance_dynamics();
            for &w in state.weights() {
                assert!(w >= cfg.w_bounds.0 && w <= cfg.w_bounds.1);
            }
            for (i, row) in state.penalty_matrix().iter().enumerate() {
                for (j, &p) in row.iter().enumerate() {
                    if i == j {
                        assert_eq!(p, 0.0);
                    } else {
                        assert!((0.0..=cfg.p_max).contains(&p));
                    }
                }
            }
        }
    }

    #[test]
    fn dynamics_increments_match_normal_moments() {
        // Monte-Carlo check of the increment generator: with bounds wide
        // enough that clipping never binds, per-entry increments should have
        // mean ~0 and std ~sigma_p.
        let mut cfg = static_config_3();
        cfg.sigma_p = 0.05;
        cfg.sigma_w = 0.0;
        cfg.p_max = 1e9;
        cfg.initial_penalty_matrix = vec![
            vec![0.0, 1e6, 1e6],
            vec![1e6, 0.0, 1e6],
            vec![1e6, 1e6, 0.0],
        ];
        let mut state = EnvState::reset(&cfg).unwrap();
        let mut increments = Vec::new();
        let mut prev = state.penalty_matrix().to_vec();
        for _ in 0..1000 {
            state.advance_dynamics();
            for (i, row) in state.penalty_matrix().iter().enumerate() {
                for (j, &p) in row.iter().enumerate() {
                    if i != j {
                        increments.push(p - prev[i][j]);
                    }
                }
            }
            prev = state.penalty_matrix().to_vec();
        }
        let n = increments.len() as f64;
        let mean = increments.iter().sum::<f64>() / n;
        let var = increments.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        assert!(mean.abs() < 0.005, "increment mean {mean} too far from 0");
        assert!(
            (std - cfg.sigma_p).abs() < 0.1 * cfg.sigma_p,
            "increment std {std} not within 10% of sigma_p {}",
            cfg.sigma_p
        );
    }

    #[test]
    fn state_vector_length_and_normalization() {
        let ranges = SuiteRanges::default();
        let suite = generate_env_suite(1, 1, &ranges).unwrap();
        let state = EnvState::reset(&suite[0]).unwrap();
        let v = state.state_vector();
        assert_eq!(v.len(), 110);
        for &b in &v[..10] {
            assert_eq!(b, 1.0);
        }
    }

    #[test]
    fn state_vector_zero_penalties() {
        let mut cfg = static_config_3();
        cfg.initial_penalty_matrix = vec![vec![0.0; 3]; 3];
        let state = EnvState::reset(&cfg).unwrap();
        let v = state.state_vector();
        assert_eq!(v.len(), 12);
        assert!(v[3..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn state_vector_raw_mode() {
        let mut cfg = static_config_3();
        cfg.normalize_state = false;
        let state = EnvState::reset(&cfg).unwrap();
        let v = state.state_vector();
        assert_eq!(&v[..3], &[2.0, 2.0, 2.0]);
        assert_eq!(v[3..6], cfg.initial_penalty_matrix[0][..]);
    }

    #[test]
    fn suite_matches_count_and_is_deterministic() {
        let ranges = SuiteRanges::default();
        let a = generate_env_suite(99, 16, &ranges).unwrap();
        let b = generate_env_suite(99, 16, &ranges).unwrap();
        assert_eq!(a.len(), 16);
        assert_eq!(a, b);
        assert!(generate_env_suite(99, 0, &ranges).unwrap().is_empty());
        // distinct seeds per config
        let mut seen = std::collections::HashSet::new();
        for cfg in &a {
            assert!(seen.insert(cfg.seed));
        }
    }

    #[test]
    fn suite_rejects_inverted_ranges() {
        let mut ranges = SuiteRanges::default();
        ranges.buffer_range = (5.0, 1.0);
        assert!(matches!(
            generate_env_suite(1, 4, &ranges),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn episode_reward_zero_when_penalties_zero() {
        let mut cfg = static_config_3();
        cfg.initial_penalty_matrix = vec![vec![0.0; 3]; 3];
        let mut state = EnvState::reset(&cfg).unwrap();
        let mut total = 0.0;
        while !state.is_terminal() {
            let user = state.eligible_actions()[0];
            total += state.step(user).unwrap().reward;
        }
        assert_eq!(total, 0.0);
    }

    #[test]
    fn identical_action_sequences_give_identical_trajectories() {
        let mut cfg = static_config_3();
        cfg.sigma_w = 0.1;
        cfg.sigma_p = 0.1;
        let mut a = EnvState::reset(&cfg).unwrap();
        let mut b = EnvState::reset(&cfg).unwrap();
        let actions = [0, 1, 2, 0, 1, 2];
        for &u in &actions {
            let ra = a.step(u).unwrap();
            let rb = b.step(u).unwrap();
            assert_eq!(ra, rb);
        }
        assert_eq!(a, b);
    }
}
