use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The one RNG used throughout the crate. Every random draw is made from a
/// `ChaCha8Rng` seeded from a `u64`, so results are platform independent.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream derived from the same seed.
pub(crate) fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
