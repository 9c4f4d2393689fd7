//! Seed derivation and the fixed transforms used to turn a seeded uniform
//! stream into the distributions the pipeline needs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and a task path such
/// as `(resample, lambda_index)`. Pure function of its inputs.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &k| mix(acc ^ mix(k.wrapping_add(0x632b_e59b_d9b4_e019))))
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal deviates by the Box-Muller transform, both outputs used.
pub fn normals(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = stream(seed);
    let mut out = Vec::with_capacity(count + 1);
    while out.len() < count {
        // (0, 1] keeps ln finite
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        out.push(r * theta.cos());
        out.push(r * theta.sin());
    }
    out.truncate(count);
    out
}

/// `count` distinct indices from `0..n`, sorted.
pub fn subsample_without_replacement(seed: u64, n: usize, count: usize) -> Vec<usize> {
    let mut rng = stream(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, count).into_vec();
    idx.sort_unstable();
    idx
}
