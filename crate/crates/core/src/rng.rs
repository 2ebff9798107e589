//! Counter-based random streams.
//!
//! Every Monte Carlo workload is split into fixed-size chunks and each chunk
//! draws from its own ChaCha stream keyed by `(seed, chunk)`. Results depend
//! only on the seed, never on thread count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent generator for chunk `chunk` of a run seeded with `seed`.
pub fn stream(seed: u64, chunk: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Derive a sub-seed for a named sub-task so that unrelated tasks sharing a
/// top-level seed never reuse a stream.
pub fn subseed(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, folded with the seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.rotate_left(17);
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed
}
