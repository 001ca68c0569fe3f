//! Seeded, reproducible random number generation.
//!
//! Every stochastic component draws from a `ChaCha8Rng` stream derived from a
//! user seed plus a tag path, so that independent runs (seeds, trajectories,
//! methods) own disjoint streams and any output is a pure function of
//! `(config, seed)`.

use rand::Rng;
use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A deterministic generator for the given seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent substream from `seed` and a tag path, e.g.
/// `stream_rng(seed, &[method_index, seed_index, trajectory_index])`.
pub fn stream_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag.wrapping_add(0x1234_5678_9abc_def0)));
    }
    ChaCha8Rng::seed_from_u64(state)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Samples a standard-normal vector of length `dim`.
pub fn standard_normal_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}
