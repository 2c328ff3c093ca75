//! Seeded random streams.
//!
//! Every stochastic routine derives its generator from `(seed, stream)` so
//! that per-draw work can be split across threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id reserved for sequential phases; per-draw streams use the draw index.
pub(crate) const SEQUENTIAL_STREAM: u64 = u64::MAX;

/// Independent generator for stream `stream` under `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
