//! Fully-connected Q-network with manual backpropagation.
//!
//! The network is a stack of dense layers: ReLU on every hidden layer,
//! identity on the output layer (Q-values are unbounded). Everything runs in
//! f64 so that finite-difference gradient checks are meaningful. There is no
//! autodiff; `backward` implements the analytic gradient of the one-action
//! squared TD residual directly.
//!
//! Checkpoint files start with the magic bytes `QNETCKPT`, a little-endian
//! u32 header length, a JSON header (format version, architecture, init
//! seed), then the raw parameters as little-endian f64 blocks in layer
//! order, weights row-major before biases.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &[u8; 8] = b"QNETCKPT";
const CHECKPOINT_VERSION: u32 = 1;

/// Shape of a Q-network: `input_dim -> hidden_width x hidden_layers ->
/// output_dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetArchitecture {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
}

impl NetArchitecture {
    /// The full-size profile: ten hidden layers of 1024 units over the
    /// 110-dimensional observation of a ten-user environment.
    pub fn paper_profile() -> Self {
        Self::paper_profile_for(10)
    }

    /// Full-size profile for an `n_users` environment.
    pub fn paper_profile_for(n_users: usize) -> Self {
        NetArchitecture {
            input_dim: n_users + n_users * n_users,
            hidden_layers: 10,
            hidden_width: 1024,
            output_dim: n_users,
        }
    }

    /// Reduced profile (three hidden layers of 256) that trains in seconds
    /// to minutes on a desktop; the default for tests and examples.
    pub fn test_profile() -> Self {
        Self::test_profile_for(10)
    }

    /// Reduced profile for an `n_users` environment.
    pub fn test_profile_for(n_users: usize) -> Self {
        NetArchitecture {
            input_dim: n_users + n_users * n_users,
            hidden_layers: 3,
            hidden_width: 256,
            output_dim: n_users,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0
            || self.hidden_layers == 0
            || self.hidden_width == 0
            || self.output_dim == 0
        {
            return Err(Error::InvalidConfig(format!(
                "architecture dimensions must all be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Layer boundary sizes: `[input, width, ..., width, output]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 2);
        dims.push(self.input_dim);
        dims.extend(std::iter::repeat(self.hidden_width).take(self.hidden_layers));
        dims.push(self.output_dim);
        dims
    }

    /// Total number of weights and biases.
    pub fn parameter_count(&self) -> usize {
        let dims = self.layer_dims();
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    /// Row-major `fan_in x fan_out`: weights[i * fan_out + j] connects input
    /// unit i to output unit j.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    /// out = W^T x + b, optionally through ReLU.
    fn forward_into(&self, input: &[f64], output: &mut Vec<f64>, relu: bool) {
        debug_assert_eq!(input.len(), self.fan_in);
        output.clear();
        output.extend_from_slice(&self.biases);
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.fan_out..(i + 1) * self.fan_out];
            for (o, &w) in output.iter_mut().zip(row) {
                *o += w * x;
            }
        }
        if relu {
            for o in output.iter_mut() {
                if *o < 0.0 {
                    *o = 0.0;
                }
            }
        }
    }
}

/// A layered fully-connected Q-network.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    arch: NetArchitecture,
    seed: u64,
    layers: Vec<Layer>,
}

/// Per-parameter gradients, shape-congruent with the network that produced
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros(arch: &NetArchitecture) -> Self {
        let dims = arch.layer_dims();
        Gradients {
            weights: dims.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect(),
            biases: dims.windows(2).map(|w| vec![0.0; w[1]]).collect(),
        }
    }

    pub fn reset(&mut self) {
        for w in &mut self.weights {
            w.fill(0.0);
        }
        for b in &mut self.biases {
            b.fill(0.0);
        }
    }

    pub fn scale_mut(&mut self, c: f64) {
        for w in self.weights.iter_mut().flatten() {
            *w *= c;
        }
        for b in self.biases.iter_mut().flatten() {
            *b *= c;
        }
    }

    /// self += c * other. Shapes must match.
    pub fn add_scaled_mut(&mut self, other: &Gradients, c: f64) {
        for (dst, src) in self.weights.iter_mut().zip(&other.weights) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += c * s;
            }
        }
        for (dst, src) in self.biases.iter_mut().zip(&other.biases) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += c * s;
            }
        }
    }

    /// Largest absolute entry; handy for diagnostics and tests.
    pub fn max_abs(&self) -> f64 {
        let w = self.weights.iter().flatten();
        let b = self.biases.iter().flatten();
        w.chain(b).fold(0.0_f64, |acc, &g| acc.max(g.abs()))
    }

    /// Weight gradient block for layer `layer`, row-major.
    pub fn weight_grad(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    /// Bias gradient block for layer `layer`.
    pub fn bias_grad(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }
}

/// Reusable buffers for the forward/backward passes of one network shape.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    activations: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

/// Initializes a network with zero biases and weights drawn uniformly from
/// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, layer by layer in row-major order.
/// Deterministic in `seed`.
pub fn init_network(arch: &NetArchitecture, seed: u64) -> Result<QNetwork> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = arch.layer_dims();
    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            Layer {
                fan_in,
                fan_out,
                weights: (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-scale..scale))
                    .collect(),
                biases: vec![0.0; fan_out],
            }
        })
        .collect();
    Ok(QNetwork {
        arch: *arch,
        seed,
        layers,
    })
}

impl QNetwork {
    pub fn architecture(&self) -> &NetArchitecture {
        &self.arch
    }

    /// Seed the parameters were initialized from (checkpoint provenance).
    pub fn init_seed(&self) -> u64 {
        self.seed
    }

    pub fn parameter_count(&self) -> usize {
        self.arch.parameter_count()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.arch.input_dim {
            return Err(Error::InvalidArgument(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.arch.input_dim
            )));
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "input contains a non-finite value".to_string(),
            ));
        }
        Ok(())
    }

    /// Q-values for every action.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut ws = Workspace::default();
        Ok(self.forward_with(input, &mut ws)?.to_vec())
    }

    /// Forward pass reusing `ws`; returns a view of the output activations.
    pub fn forward_with<'w>(&self, input: &[f64], ws: &'w mut Workspace) -> Result<&'w [f64]> {
        self.check_input(input)?;
        ws.activations.resize(self.layers.len(), Vec::new());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = ws.activations.split_at_mut(l);
            let src = if l == 0 { input } else { head[l - 1].as_slice() };
            layer.forward_into(src, &mut tail[0], l != last);
        }
        Ok(ws.activations[last].as_slice())
    }

    /// Loss and exact analytic gradients of `0.5 * (Q(s)[a] - td_target)^2`.
    pub fn backward(&self, input: &[f64], action: usize, td_target: f64) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros(&self.arch);
        let mut ws = Workspace::default();
        let loss = self.backward_accumulate(input, action, td_target, 1.0, &mut grads, &mut ws)?;
        Ok((loss, grads))
    }

    /// Like [`backward`](Self::backward) but adds `weight` times the sample
    /// gradient into `grads`, reusing workspace buffers. Returns the sample
    /// loss. The training loop averages a batch by accumulating with
    /// `weight = 1/batch_size`.
    pub fn backward_accumulate(
        &self,
        input: &[f64],
        action: usize,
        td_target: f64,
        weight: f64,
        grads: &mut Gradients,
        ws: &mut Workspace,
    ) -> Result<f64> {
        if action >= self.arch.output_dim {
            return Err(Error::InvalidArgument(format!(
                "action {action} out of range for {} outputs",
                self.arch.output_dim
            )));
        }
        if !td_target.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "td_target is not finite: {td_target}"
            )));
        }
        self.forward_with(input, ws)?;

        let last = self.layers.len() - 1;
        let residual = ws.activations[last][action] - td_target;
        let loss = 0.5 * residual * residual;

        // dLoss/dOutput is zero except at the chosen action.
        ws.delta.clear();
        ws.delta.resize(self.arch.output_dim, 0.0);
        ws.delta[action] = residual;

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let below: &[f64] = if l == 0 { input } else { &ws.activations[l - 1] };

            let gw = &mut grads.weights[l];
            for (i, &x) in below.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let row = &mut gw[i * layer.fan_out..(i + 1) * layer.fan_out];
                let wx = weight * x;
                for (g, &d) in row.iter_mut().zip(&ws.delta) {
                    *g += wx * d;
                }
            }
            for (g, &d) in grads.biases[l].iter_mut().zip(&ws.delta) {
                *g += weight * d;
            }

            if l == 0 {
                break;
            }
            // Propagate to the layer below and gate by its ReLU.
            ws.next_delta.clear();
            ws.next_delta.resize(layer.fan_in, 0.0);
            for (i, nd) in ws.next_delta.iter_mut().enumerate() {
                if below[i] <= 0.0 {
                    continue; // ReLU output was clamped; gradient is zero
                }
                let row = &layer.weights[i * layer.fan_out..(i + 1) * layer.fan_out];
                *nd = row.iter().zip(&ws.delta).map(|(&w, &d)| w * d).sum();
            }
            std::mem::swap(&mut ws.delta, &mut ws.next_delta);
        }
        Ok(loss)
    }

    /// One plain gradient step: every parameter is decremented by
    /// `step_size * grad`. Errors if any parameter stops being finite.
    pub fn apply_update(&mut self, grads: &Gradients, step_size: f64) -> Result<()> {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (w, &g) in layer.weights.iter_mut().zip(&grads.weights[l]) {
                *w -= step_size * g;
            }
            for (b, &g) in layer.biases.iter_mut().zip(&grads.biases[l]) {
                *b -= step_size * g;
            }
        }
        self.check_finite()
    }

    fn check_finite(&self) -> Result<()> {
        for (l, layer) in self.layers.iter().enumerate() {
            let bad = layer
                .weights
                .iter()
                .chain(&layer.biases)
                .any(|p| !p.is_finite());
            if bad {
                return Err(Error::TrainingDiverged {
                    iteration: 0,
                    detail: format!("non-finite parameter in layer {l}"),
                });
            }
        }
        Ok(())
    }

    /// Weight matrix of layer `layer`, row-major `fan_in x fan_out`.
    pub fn layer_weights(&self, layer: usize) -> &[f64] {
        &self.layers[layer].weights
    }

    pub fn layer_biases(&self, layer: usize) -> &[f64] {
        &self.layers[layer].biases
    }

    /// Mutable parameter access for tests and hand-constructed networks.
    pub fn layer_weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.layers[layer].weights
    }

    pub fn layer_biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.layers[layer].biases
    }

    /// Writes the network to `path` in the documented checkpoint format.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let header = CheckpointHeader {
            format_version: CHECKPOINT_VERSION,
            architecture: self.arch,
            seed: self.seed,
        };
        let header_bytes = serde_json::to_vec(&header).map_err(|e| Error::json(path, e))?;
        out.write_all(CHECKPOINT_MAGIC)
            .and_then(|_| out.write_all(&(header_bytes.len() as u32).to_le_bytes()))
            .and_then(|_| out.write_all(&header_bytes))
            .map_err(|e| Error::io(path, e))?;
        for layer in &self.layers {
            for &w in layer.weights.iter().chain(&layer.biases) {
                out.write_all(&w.to_le_bytes()).map_err(|e| Error::io(path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Loads a checkpoint written by [`save_checkpoint`](Self::save_checkpoint).
    /// Round-trips are bit-exact.
    pub fn load_checkpoint(path: &Path) -> Result<QNetwork> {
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
        if &magic != CHECKPOINT_MAGIC {
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
        let header: CheckpointHeader =
            serde_json::from_slice(&header_bytes).map_err(|e| Error::json(path, e))?;
        if header.format_version != CHECKPOINT_VERSION {
            return Err(format_err(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        header.architecture.validate()?;

        let mut offset = 8 + 4 + header_len;
        let dims = header.architecture.layer_dims();
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (l, w) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut read_block = |count: usize, what: &str| -> Result<Vec<f64>> {
                let mut bytes = vec![0u8; count * 8];
                input.read_exact(&mut bytes).map_err(|_| {
                    format_err(format!(
                        "truncated while reading layer {l} {what} ({count} f64s at byte offset {offset})"
                    ))
                })?;
                offset += bytes.len();
                Ok(bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect())
            };
            let weights = read_block(fan_in * fan_out, "weights")?;
            let biases = read_block(fan_out, "biases")?;
            layers.push(Layer {
                fan_in,
                fan_out,
                weights,
                biases,
            });
        }
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
            return Err(format_err(format!(
                "trailing bytes after parameter blocks (expected exactly {offset} bytes)"
            )));
        }
        Ok(QNetwork {
            arch: header.architecture,
            seed: header.seed,
            layers,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format_version: u32,
    architecture: NetArchitecture,
    seed: u64,
}
