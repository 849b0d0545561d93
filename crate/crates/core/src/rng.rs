//! Deterministic random streams.
//!
//! Every stream is ChaCha8 (`rand_chacha::ChaCha8Rng`) with the 256-bit key
//! set to the seed as a little-endian `u64` followed by 24 zero bytes, the
//! 64-bit stream id set to the trial or episode index, and the word position
//! starting at zero. Uniform doubles take the top 53 bits of `next_u64`.
//! The same `(seed, index)` therefore yields the same numbers regardless of
//! how trials are spread across worker threads.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::rand_core::RngCore as Rng;

/// Stream `index` of the generator keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Uniform double in `[0, 1)`.
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `true` with probability `p`.
pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> bool {
    uniform(rng) < p
}

/// Uniform index in `0..len` (`len > 0`).
pub fn index<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> usize {
    debug_assert!(len > 0);
    ((uniform(rng) * len as f64) as usize).min(len - 1)
}

/// Standard normal draw (Box–Muller, one value per two uniforms).
pub fn normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
