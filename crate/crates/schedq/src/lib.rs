//! User scheduling with switching costs, a greedy baseline, and an offline
//! deep Q-learning trainer.
//!
//! The crate simulates a single transmitter serving `N` users whose buffers,
//! per-step transmission weights, and pairwise switching penalties drift as
//! clipped Brownian motion. On top of the simulator it provides:
//!
//! - [`baseline`]: the myopic greedy policy and a memoized exhaustive oracle
//!   for small static instances,
//! - [`nn`]: a from-scratch fully-connected Q-network (ReLU hidden layers,
//!   manual backpropagation, binary checkpoints),
//! - [`qlearn`]: replay-buffer collection and the offline training loop with
//!   a periodically synced target network,
//! - [`eval`]: the evaluation harness — advantage percentages, kernel
//!   density estimates, aggregate reports,
//! - [`pipeline`]: the file-based experiment stages behind the `schedq`
//!   binary (`gen-env`, `collect`, `train`, `evaluate`, `report`).
//!
//! The `examples/` directory walks through each capability; start with
//! `penalty_dynamics` and end with `full_pipeline`. Every run is
//! deterministic in its seed.

pub mod baseline;
pub mod env;
pub mod error;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod plot;
pub mod qlearn;
mod seeds;

pub use error::{Error, Result};
