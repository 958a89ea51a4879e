//! Sustainable raw-data scheduling for energy-harvesting pressure sensors in a
//! water distribution network.
//!
//! The crate is organised the way the system itself is:
//!
//! - [`trace_gen`] synthesises correlated high-rate pressure streams for a pipe
//!   network (propagation delay, friction attenuation, injected anomalies).
//! - [`compression`] and [`anomaly`] run on the sensor node: chunk-wise LZ77
//!   compression, and anomaly detection on the resulting compression-rate stream.
//! - [`energy`] is the per-node battery queue with harvesting and overflow.
//! - [`correlation`], [`estimation`] and [`scheduler`] run at the data
//!   processing center: the Pearson correlation graph, regression-based stream
//!   estimation, and the per-interval transmission decision (DTS, FAST-DTS and
//!   the RG/EG/RR baselines).
//! - [`harness`] wires everything into a discrete-interval simulation with
//!   metrics, sweeps, scenario replays and file output.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anomaly;
pub mod compression;
pub mod correlation;
pub mod energy;
mod error;
pub mod estimation;
pub mod harness;
pub mod scheduler;
pub mod stats;
pub mod trace_gen;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};

/// Identifier of a sensor node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// Independent deterministic random stream for `(seed, domain, key)`.
pub(crate) fn substream(seed: u64, domain: u64, key: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 40) ^ key);
    rng
}

/// Stream domains for [`substream`].
pub(crate) mod domain {
    pub const TRACE: u64 = 1;
    pub const ENERGY: u64 = 2;
}
