//! Pinned random number generation.
//!
//! Every random quantity in the crate is drawn from [`ChaCha8Rng`], a
//! counter-based generator. A replica is identified by `(master_seed, stream)`:
//! the seed keys the cipher and the stream selects an independent nonce, so a
//! sample's randomness depends only on its index and never on which worker ran
//! it.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

pub type Seed = u64;

/// Generator for a single-stream run.
pub fn seeded(seed: Seed) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for replica `stream` under `master`.
pub fn stream(master: Seed, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}
