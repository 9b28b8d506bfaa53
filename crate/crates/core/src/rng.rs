//! Reproducible random streams.
//!
//! Every resample draws from its own ChaCha20 stream, selected by the
//! resample index, so results do not depend on how work is scheduled across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const GENERATOR: &str =
    "ChaCha20Rng (rand_chacha 0.9), seed_from_u64(seed), stream = resample index";

pub fn stream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
