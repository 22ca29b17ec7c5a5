//! Deterministic random streams.
//!
//! Every stochastic quantity draws from its own ChaCha stream whose seed is a
//! hash of the master seed and a tuple of tags (stage, user, frame, ...), so
//! results do not depend on evaluation order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::C64;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a tag tuple into a child seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// `exp(i·2π·a)` with `a ~ U(0, 1)`.
pub fn unit_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let a: f64 = rng.random();
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * a)
}

// Stream tags.
pub const TAG_CHANNEL: u64 = 1;
pub const TAG_NOISE: u64 = 2;
pub const TAG_DESIGN: u64 = 3;
