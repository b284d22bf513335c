//! Seeded random streams.
//!
//! Every random quantity in the crate comes from a ChaCha20 generator seeded
//! with `seed_from_u64`; independent purposes draw from distinct ChaCha
//! stream ids derived from one master seed, so adding workers or reordering
//! evaluations never changes which numbers a given purpose sees.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Identifier recorded in reports so runs can be replayed.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64, per-purpose stream id)";

/// Named substreams of a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Candidates = 1,
    Family = 2,
    Synthetic = 3,
    Missing = 4,
}

/// Generator for one purpose under a master seed.
pub fn stream(master_seed: u64, purpose: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(purpose as u64);
    rng
}

/// A plain generator for APIs that take their own seed.
pub fn seeded(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// A `u64` seed for `purpose`, derived from the master seed.
pub fn derive_seed(master_seed: u64, purpose: Stream) -> u64 {
    use rand::RngCore;
    stream(master_seed, purpose).next_u64()
}
