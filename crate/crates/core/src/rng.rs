//! Counter-based seed derivation.
//!
//! Every random stream in the crate is addressed by a path of integers
//! hanging off one root seed, e.g. `(root, DATA, replication, subgraph)`.
//! The path is folded through SplitMix64 into the 64-bit seed of a
//! ChaCha8 generator, so a stream never depends on which thread runs it
//! or in which order work units are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains, kept distinct so that e.g. data generation and fitting
/// never share a stream for the same replication.
pub mod domain {
    pub const SAMPLE_GRAPH: u64 = 1;
    pub const DATA: u64 = 2;
    pub const FIT_WITHIN: u64 = 3;
    pub const FIT_BETWEEN: u64 = 4;
    pub const THETA: u64 = 5;
    pub const INFO: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `path` into `root`. Distinct paths give unrelated seeds; the
/// length is mixed in so that `[a]` and `[a, 0]` differ.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(root ^ 0x6C6F_6364_6570_0000);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p));
    }
    splitmix64(h ^ path.len() as u64)
}

pub fn stream(root: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}
