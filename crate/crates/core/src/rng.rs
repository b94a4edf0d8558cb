//! Seed derivation and per-node random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream that is a
//! pure function of `(seed, domain, key)`. Per-node streams keyed by a node's
//! external id make simulated draws follow the node, not its position, so a
//! relabelled panel reproduces the same estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

/// Domain tags separating the streams used by different stages.
pub mod domain {
    pub const COVARIATES: u64 = 0x636f_7661;
    pub const Y0: u64 = 0x7930_0000;
    pub const Y1: u64 = 0x7931_0000;
    pub const TRUTH: u64 = 0x7472_7574;
    pub const MU1_DRAWS: u64 = 0x6d75_3144;
    pub const CV_FOLDS: u64 = 0x6366_6f6c;
    pub const GRAPH: u64 = 0x6772_6170;
    pub const REPLICATION: u64 = 0x7265_706c;
    pub const PROXY: u64 = 0x7072_6f78;
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a tag.
#[inline]
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(mix64(seed) ^ tag)
}

/// A stream for a given `(seed, domain)`; `key` selects one of 2^64 streams.
pub fn stream(seed: u64, domain: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, domain));
    rng.set_stream(key);
    rng
}

/// Uniform draw on [0, 1).
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
