//! Named random streams derived from a master seed.
//!
//! Every stream is an independent ChaCha8 generator whose seed is a mix of
//! `(master_seed, stream label, node index)`. Changing how many draws one
//! stream makes never shifts another stream's sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ids::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamId {
    Placement,
    Traffic,
    Mobility(NodeId),
    MacBackoff(NodeId),
    Beacon(NodeId),
}

impl StreamId {
    fn label(self) -> (u64, u64) {
        match self {
            StreamId::Placement => (1, 0),
            StreamId::Traffic => (2, 0),
            StreamId::Mobility(n) => (3, n.get() as u64),
            StreamId::MacBackoff(n) => (4, n.get() as u64),
            StreamId::Beacon(n) => (5, n.get() as u64),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct RngStream {
    id: StreamId,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, id: StreamId) -> Self {
        let (tag, node) = id.label();
        let mut seed = [0u8; 32];
        let mut state = splitmix64(master_seed);
        state = splitmix64(state ^ tag.wrapping_mul(0xa076_1d64_78bd_642f));
        state = splitmix64(state ^ node.wrapping_mul(0xe703_7ed1_a0b4_28db));
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        RngStream {
            id,
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    /// Uniform real in `[lo, hi]`. `lo == hi` returns `lo` without consuming.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        assert!(lo <= hi, "uniform({lo}, {hi}): empty interval");
        if lo == hi {
            return lo;
        }
        self.rng.random_range(lo..=hi)
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn uniform_int(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi, "uniform_int({lo}, {hi}): empty interval");
        if lo == hi {
            return lo;
        }
        self.rng.random_range(lo..=hi)
    }
}
