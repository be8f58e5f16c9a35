//! Seeded random streams.
//!
//! A single master seed is expanded into independent ChaCha streams by a
//! stream index, so chains and trials can run concurrently and still produce
//! identical output for a given seed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Returns the random stream `stream` derived from `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream index for sub-stream `sub` (< 256) of item `index`.
pub fn substream(index: u64, sub: u64) -> u64 {
    debug_assert!(sub < 256);
    (index << 8) | sub
}
