//! Seeded, stream-splittable random number generation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name of the generator recorded in reports.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.3, seed_from_u64, stream-split)";

/// Generator for `seed`, on an independent `stream`.
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
