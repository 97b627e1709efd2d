//! Hierarchical seed derivation.
//!
//! Every random stream used by a run is derived from a parent seed and a
//! label, so that independent consumers (topology, channel assignment, each
//! channel's PR process, each node's strategy, election) never share draws.
//! Streams that do not depend on the protocol or handshake under test are
//! keyed only by the run seed, which makes comparisons across those axes
//! paired.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a child seed from `parent`, a label and an index.
pub fn derive(parent: u64, label: &str, index: u64) -> u64 {
    let a = splitmix64(parent ^ fnv1a(label));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn stream(parent: u64, label: &str, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive(parent, label, index))
}

/// Seed of run `run_index` under `base_seed`. Shared by every sweep cell so
/// that cells differing only in protocol or handshake see the same topology,
/// channel sets and PR traces.
pub fn run_seed(base_seed: u64, run_index: u64) -> u64 {
    derive(base_seed, "run", run_index)
}
