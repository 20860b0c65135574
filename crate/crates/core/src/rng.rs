use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent deterministic stream `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
