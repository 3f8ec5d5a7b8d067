//! Offline Q-learning over a pre-collected base of samples.
//!
//! Sample collection runs seeded episodes with an epsilon-mixture of a
//! uniform-random policy and the greedy baseline, storing every transition
//! `{s, a, r, s', terminal}`. Training never touches the simulator again: it
//! draws batches from the replay buffer, regresses the policy network on
//! TD targets computed with a frozen target network, and copies the policy
//! into the target every `target_update_period` iterations.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baseline;
use crate::env::{EnvConfig, EnvState};
use crate::error::{Error, Result};
use crate::nn::{init_network, Gradients, NetArchitecture, QNetwork, Workspace};
use crate::seeds;

const BUFFER_MAGIC: &[u8; 8] = b"QREPLAY\0";
const BUFFER_VERSION: u32 = 1;

/// One replay sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub terminal: bool,
}

/// Append-only store of transitions; the oldest entries are evicted once
/// `capacity` is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    transitions: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            transitions: VecDeque::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.transitions.len() == self.capacity {
            self.transitions.pop_front();
        }
        self.transitions.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.transitions[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter()
    }

    /// State dimension of the stored transitions, when any exist.
    pub fn state_dim(&self) -> Option<usize> {
        self.transitions.front().map(|t| t.s.len())
    }

    /// Number of users implied by the stored state dimension, when it is of
    /// the form `n + n^2`.
    pub fn n_users(&self) -> Option<usize> {
        let dim = self.state_dim()?;
        let mut n = 1;
        while n + n * n < dim {
            n += 1;
        }
        (n + n * n == dim).then_some(n)
    }

    /// Writes the buffer to `path`: magic bytes, little-endian u32 header
    /// length, a JSON header (format version, n_users, state_dim, count),
    /// then fixed-width little-endian records
    /// `[s; dim][a: u32][r: f64][s_next; dim][terminal: u8]`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let state_dim = self.state_dim().unwrap_or(0);
        if let Some(bad) = self.transitions.iter().position(|t| {
            t.s.len() != state_dim || t.s_next.len() != state_dim
        }) {
            return Err(Error::InvalidArgument(format!(
                "transition {bad} has inconsistent state dimensions"
            )));
        }
        let header = BufferHeader {
            format_version: BUFFER_VERSION,
            n_users: self.n_users().unwrap_or(0),
            state_dim,
            count: self.len(),
            capacity: self.capacity,
        };
        let header_bytes = serde_json::to_vec(&header).map_err(|e| Error::json(path, e))?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io_err = |e| Error::io(path, e);
        out.write_all(BUFFER_MAGIC).map_err(io_err)?;
        out.write_all(&(header_bytes.len() as u32).to_le_bytes())
            .map_err(io_err)?;
        out.write_all(&header_bytes).map_err(io_err)?;
        for t in &self.transitions {
            for &x in &t.s {
                out.write_all(&x.to_le_bytes()).map_err(io_err)?;
            }
            out.write_all(&(t.a as u32).to_le_bytes()).map_err(io_err)?;
            out.write_all(&t.r.to_le_bytes()).map_err(io_err)?;
            for &x in &t.s_next {
                out.write_all(&x.to_le_bytes()).map_err(io_err)?;
            }
            out.write_all(&[t.terminal as u8]).map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }

    /// Loads a buffer written by [`save`](Self::save).
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let format_err = |detail: String| Error::FileFormat {
            path: path.to_path_buf(),
            detail,
        };

        let mut magic = [0u8; 8];
        input
            .read_exact(&mut magic)
            .map_err(|_| format_err("file too short for magic bytes".to_string()))?;
        if &magic != BUFFER_MAGIC {
            return Err(format_err(format!("bad magic bytes {magic:?}")));
        }
        let mut len_bytes = [0u8; 4];
        input
            .read_exact(&mut len_bytes)
            .map_err(|_| format_err("file too short for header length".to_string()))?;
        let header_len = u32::from_le_bytes(len_bytes) as usize;
        if header_len > 1 << 20 {
            return Err(format_err(format!("implausible header length {header_len}")));
        }
        let mut header_bytes = vec![0u8; header_len];
        input
            .read_exact(&mut header_bytes)
            .map_err(|_| format_err("file too short for JSON header".to_string()))?;
        let header: BufferHeader =
            serde_json::from_slice(&header_bytes).map_err(|e| Error::json(path, e))?;
        if header.format_version != BUFFER_VERSION {
            return Err(format_err(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }

        let record_len = header.state_dim * 8 * 2 + 4 + 8 + 1;
        let mut buffer = ReplayBuffer::new(header.capacity.max(header.count));
        let mut record = vec![0u8; record_len];
        for idx in 0..header.count {
            input.read_exact(&mut record).map_err(|_| {
                format_err(format!("truncated at record {idx} of {}", header.count))
            })?;
            let mut pos = 0;
            let read_f64s = |pos: &mut usize, count: usize| -> Vec<f64> {
                let res = record[*pos..*pos + count * 8]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                *pos += count * 8;
                res
            };
            let s = read_f64s(&mut pos, header.state_dim);
            let a = u32::from_le_bytes(record[pos..pos + 4].try_into().unwrap()) as usize;
            pos += 4;
            let r = f64::from_le_bytes(record[pos..pos + 8].try_into().unwrap());
            pos += 8;
            let s_next = read_f64s(&mut pos, header.state_dim);
            let terminal = match record[pos] {
                0 => false,
                1 => true,
                other => {
                    return Err(format_err(format!(
                        "record {idx}: bad terminal flag {other}"
                    )))
                }
            };
            buffer.push(Transition {
                s,
                a,
                r,
                s_next,
                terminal,
            });
        }
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
            return Err(format_err("trailing bytes after records".to_string()));
        }
        Ok(buffer)
    }

    /// Writes the buffer as CSV for inspection: one row per transition with
    /// columns `s_0..s_{d-1}, action, reward, sn_0..sn_{d-1}, terminal`.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let dim = self.state_dim().unwrap_or(0);
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io_err = |e| Error::io(path, e);
        let mut header: Vec<String> = (0..dim).map(|i| format!("s_{i}")).collect();
        header.push("action".into());
        header.push("reward".into());
        header.extend((0..dim).map(|i| format!("sn_{i}")));
        header.push("terminal".into());
        writeln!(out, "{}", header.join(",")).map_err(io_err)?;
        for t in &self.transitions {
            let mut fields: Vec<String> = t.s.iter().map(|x| x.to_string()).collect();
            fields.push(t.a.to_string());
            fields.push(t.r.to_string());
            fields.extend(t.s_next.iter().map(|x| x.to_string()));
            fields.push((t.terminal as u8).to_string());
            writeln!(out, "{}", fields.join(",")).map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct BufferHeader {
    format_version: u32,
    n_users: usize,
    state_dim: usize,
    count: usize,
    capacity: usize,
}

/// Runs `episodes_per_env` seeded episodes of every config and stores all
/// transitions.
///
/// Each action is uniform over the eligible users with probability
/// `policy_mix`, otherwise the greedy choice. Episode `k` (counting across
/// the whole run) uses seed `seed + k`, so the buffer's content does not
/// depend on scheduling; episodes run in parallel.
pub fn collect_samples(
    configs: &[EnvConfig],
    episodes_per_env: usize,
    policy_mix: f64,
    seed: u64,
    capacity: usize,
) -> Result<ReplayBuffer> {
    if configs.is_empty() {
        return Err(Error::InvalidArgument(
            "collect_samples needs at least one env config".to_string(),
        ));
    }
    if !(0.0..=1.0).contains(&policy_mix) {
        return Err(Error::InvalidArgument(format!(
            "policy_mix must be in [0, 1], got {policy_mix}"
        )));
    }

    let jobs: Vec<(usize, &EnvConfig)> = configs
        .iter()
        .flat_map(|cfg| std::iter::repeat(cfg).take(episodes_per_env))
        .enumerate()
        .collect();

    let episodes: Vec<Result<Vec<Transition>>> = jobs
        .par_iter()
        .map(|&(index, config)| {
            let episode_seed = seed.wrapping_add(index as u64);
            collect_episode(config, policy_mix, episode_seed)
                .map_err(|e| Error::Episode {
                    index,
                    source: Box::new(e),
                })
        })
        .collect();

    let mut buffer = ReplayBuffer::new(capacity);
    for episode in episodes {
        for t in episode? {
            buffer.push(t);
        }
    }
    Ok(buffer)
}

fn collect_episode(
    config: &EnvConfig,
    policy_mix: f64,
    episode_seed: u64,
) -> Result<Vec<Transition>> {
    let env_config = config.with_seed(seeds::derive(episode_seed, 0));
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seeds::derive(episode_seed, 1));
    let mut state = EnvState::reset(&env_config)?;
    let mut transitions = Vec::new();
    while !state.is_terminal() {
        let s = state.state_vector();
        let eligible = state.eligible_actions();
        let a = if policy_rng.random::<f64>() < policy_mix {
            *eligible
                .choose(&mut policy_rng)
                .expect("non-terminal state has an eligible action")
        } else {
            baseline::greedy_action(&state)?
        };
        let out = state.step(a)?;
        transitions.push(Transition {
            s,
            a,
            r: out.reward,
            s_next: out.next_state_vector,
            terminal: out.terminal,
        });
    }
    Ok(transitions)
}

/// Bootstrapped regression target for one transition: `r` when terminal,
/// otherwise `r + gamma * max_a Q_target(s', a)` with the max restricted to
/// the actions actually available in `s'`.
///
/// Availability is read off the stored state vector: entry `j < n_actions`
/// is a (scaled) buffer level, and user `j` can be served iff it is
/// positive. Without the restriction the bootstrap leaks values of
/// action pairs the environment never allows — pairs absent from every
/// collected sample, so the network's estimates there are pure
/// extrapolation — and offline training collapses toward myopic play.
pub fn td_target(transition: &Transition, target_net: &QNetwork, gamma: f64) -> Result<f64> {
    if transition.terminal {
        return Ok(transition.r);
    }
    let q = target_net.forward(&transition.s_next)?;
    Ok(transition.r + gamma * masked_max(&q, &transition.s_next))
}

fn td_target_with(
    transition: &Transition,
    target_net: &QNetwork,
    gamma: f64,
    ws: &mut Workspace,
) -> Result<f64> {
    if transition.terminal {
        return Ok(transition.r);
    }
    let q = target_net.forward_with(&transition.s_next, ws)?;
    Ok(transition.r + gamma * masked_max(q, &transition.s_next))
}

/// Max of `q` over the users with data left in `state` (falls back to the
/// plain max if the vector marks no user as servable).
fn masked_max(q: &[f64], state: &[f64]) -> f64 {
    let masked = q
        .iter()
        .zip(state)
        .filter(|&(_, &b)| b > 0.0)
        .map(|(&qv, _)| qv)
        .fold(f64::NEG_INFINITY, f64::max);
    if masked.is_finite() {
        masked
    } else {
        q.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Hyperparameters of the offline training loop. The paper leaves all of
/// these unstated; the defaults here are the documented guesses.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    /// Discounting factor in `[0, 1]`.
    pub gamma: f64,
    /// Copy the policy into the target every this many iterations.
    pub target_update_period: usize,
    /// Gradient step size.
    pub step_size: f64,
    /// Transitions per batch, sampled uniformly with replacement.
    pub batch_size: usize,
    /// Number of optimization iterations.
    pub train_steps: usize,
    /// Collection-policy mixing weight (probability of a uniform-random
    /// action during sample gathering).
    pub epsilon: f64,
    /// Momentum coefficient for the update; `None` is a plain gradient step.
    #[serde(default)]
    pub momentum: Option<f64>,
    /// When set, ignore batched sampling and take single in-order passes
    /// over the buffer (capped at `train_steps` samples).
    #[serde(default)]
    pub sequential: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.95,
            target_update_period: 500,
            step_size: 1e-4,
            batch_size: 64,
            train_steps: 20_000,
            epsilon: 0.5,
            momentum: None,
            sequential: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0..=1.0).contains(&self.gamma) {
            problems.push(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if self.target_update_period == 0 {
            problems.push("target_update_period must be positive".to_string());
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            problems.push(format!("step_size {} must be positive", self.step_size));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".to_string());
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            problems.push(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if let Some(m) = self.momentum {
            if !(0.0..1.0).contains(&m) {
                problems.push(format!("momentum {m} outside [0, 1)"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

/// What [`train`] returns: the trained policy network, the per-iteration
/// batch losses, and the iterations at which the target was synced.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: QNetwork,
    pub loss_history: Vec<f64>,
    pub target_syncs: Vec<usize>,
}

/// Observer view of one completed training iteration.
pub struct TrainStep<'a> {
    pub iteration: usize,
    pub loss: f64,
    pub policy: &'a QNetwork,
    pub target: &'a QNetwork,
}

/// Offline Q-learning over a frozen replay buffer.
///
/// Initializes the policy network from the config seed, copies it into the
/// target, then for `train_steps` iterations samples a batch, regresses the
/// policy on TD targets from the frozen target network, and syncs the target
/// at every multiple of `target_update_period`. The simulator is never
/// consulted.
pub fn train(buffer: &ReplayBuffer, arch: &NetArchitecture, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_hook(buffer, arch, cfg, |_| {})
}

/// [`train`] with a per-iteration observer, used by diagnostics and tests
/// that need to watch the policy/target pair evolve.
pub fn train_with_hook(
    buffer: &ReplayBuffer,
    arch: &NetArchitecture,
    cfg: &TrainConfig,
    mut hook: impl FnMut(TrainStep<'_>),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut policy = init_network(arch, seeds::derive(cfg.seed, 0))?;
    if cfg.train_steps == 0 {
        return Ok(TrainOutcome {
            policy,
            loss_history: Vec::new(),
            target_syncs: Vec::new(),
        });
    }
    if buffer.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot train on an empty replay buffer".to_string(),
        ));
    }

    let mut target = policy.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, 1));
    let mut grads = Gradients::zeros(arch);
    let mut velocity = cfg.momentum.map(|_| Gradients::zeros(arch));
    let mut ws = Workspace::default();
    let mut target_ws = Workspace::default();
    let mut loss_history = Vec::new();
    let mut target_syncs = Vec::new();

    let steps = if cfg.sequential {
        cfg.train_steps.min(buffer.len())
    } else {
        cfg.train_steps
    };
    let batch_size = if cfg.sequential { 1 } else { cfg.batch_size };

    for iteration in 1..=steps {
        grads.reset();
        let mut loss_sum = 0.0;
        for _ in 0..batch_size {
            let index = if cfg.sequential {
                iteration - 1
            } else {
                rng.random_range(0..buffer.len())
            };
            let t = buffer.get(index);
            let td = td_target_with(t, &target, cfg.gamma, &mut target_ws)?;
            loss_sum += policy.backward_accumulate(
                &t.s,
                t.a,
                td,
                1.0 / batch_size as f64,
                &mut grads,
                &mut ws,
            )?;
        }
        let loss = loss_sum / batch_size as f64;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged {
                iteration,
                detail: format!("batch loss is {loss}"),
            });
        }
        loss_history.push(loss);

        let update_result = match (&mut velocity, cfg.momentum) {
            (Some(v), Some(beta)) => {
                v.scale_mut(beta);
                v.add_scaled_mut(&grads, 1.0);
                policy.apply_update(v, cfg.step_size)
            }
            _ => policy.apply_update(&grads, cfg.step_size),
        };
        update_result.map_err(|e| match e {
            Error::TrainingDiverged { detail, .. } => Error::TrainingDiverged { iteration, detail },
            other => other,
        })?;

        if iteration % cfg.target_update_period == 0 {
            target = policy.clone();
            target_syncs.push(iteration);
        }
        hook(TrainStep {
            iteration,
            loss,
            policy: &policy,
            target: &target,
        });
    }

    Ok(TrainOutcome {
        policy,
        loss_history,
        target_syncs,
    })
}

/// Greedy action of `net` in `state`, restricted to eligible users; ties go
/// to the lowest index.
pub fn act(net: &QNetwork, state: &EnvState) -> Result<usize> {
    let eligible = state.eligible_actions();
    if eligible.is_empty() {
        return Err(Error::NoAction);
    }
    let q = net.forward(&state.state_vector())?;
    let mut best = eligible[0];
    for &user in &eligible[1..] {
        if q[user] > q[best] {
            best = user;
        }
    }
    Ok(best)
}
