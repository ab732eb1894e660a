//! Seed derivation shared by every randomized routine.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes a run seed with a stream index (splitmix64 finalizer) so that
/// parallel workers get independent, order-free streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// One draw from Laplace(0, beta) by inverse CDF.
pub fn laplace<R: rand::Rng + ?Sized>(rng: &mut R, beta: f64) -> f64 {
    let mut u: f64 = rng.random::<f64>() - 0.5;
    while u == -0.5 {
        u = rng.random::<f64>() - 0.5;
    }
    -beta * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// FNV-1a of a string; stable across platforms and releases.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}
