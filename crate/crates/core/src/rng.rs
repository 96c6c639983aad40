//! Counter-based per-path random streams.
//!
//! Path `i` of a run seeded with `seed` draws from ChaCha8 keyed by `seed`
//! on stream `i`. The stream depends only on `(seed, i)`, so any subset of
//! paths can be regenerated independently of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

pub fn path_rng(seed: u64, index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
