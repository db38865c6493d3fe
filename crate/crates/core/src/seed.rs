//! Deterministic seed tree.
//!
//! Every random stream in the crate is keyed by a path
//! `(master, purpose, a, b)` hashed through SplitMix64 finalizers, so a
//! replica's stream never depends on scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used for all simulation streams.
pub type SimRng = ChaCha8Rng;

/// Purpose tags. Two purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Landscape = 0x4c41_4e44,
    Chain = 0x4348_4149,
    Labelling = 0x4c41_4245,
    Marks = 0x4d41_524b,
    Subordinator = 0x5355_424f,
    Skeleton = 0x534b_454c,
    Trap = 0x5452_4150,
    Sampling = 0x5341_4d50,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of a word under a key; the building block of counter-based sampling.
#[inline]
pub fn keyed(key: u64, counter: u64) -> u64 {
    mix64(key ^ mix64(counter.wrapping_mul(GOLDEN).wrapping_add(GOLDEN)))
}

/// Seed for the stream `(master, purpose, a, b)`.
pub fn derive(master: u64, purpose: Purpose, a: u64, b: u64) -> u64 {
    let mut h = keyed(master, purpose as u64);
    h = keyed(h, a);
    keyed(h, b)
}

/// A ChaCha stream for `(master, purpose, a, b)`.
pub fn rng(master: u64, purpose: Purpose, a: u64, b: u64) -> SimRng {
    SimRng::seed_from_u64(derive(master, purpose, a, b))
}

/// Uniform in the open interval (0, 1) from 64 random bits.
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}
