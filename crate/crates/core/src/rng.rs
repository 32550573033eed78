//! Seeded randomness.
//!
//! All sampling in the crate goes through [`SeedState`], a ChaCha8 stream
//! cipher keyed from a 64-bit seed. ChaCha is counter-based, so the output
//! sequence for a given seed is identical on every platform. Normal deviates
//! come from the inverse CDF applied to one uniform per coordinate rather than
//! from Box-Muller.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::normal::inverse_cdf;

/// Finalizer from SplitMix64. Bijective on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `index` of an experiment seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ index)
}

/// Maps 64 random bits to a uniform in the open interval (0, 1).
pub fn bits_to_open01(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Maps 64 random bits to a standard normal deviate.
pub fn bits_to_normal(bits: u64) -> f64 {
    inverse_cdf(bits_to_open01(bits))
}

/// A value-semantic random stream.
///
/// Cloning yields an independent copy positioned at the same point of the
/// stream, so two clones produce identical sequences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl SeedState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Same key as `self`'s seed but on a separate ChaCha stream, starting at
    /// the beginning of that stream.
    pub fn substream(&self, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        Self {
            seed: self.seed,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on (0, 1), never exactly 0 or 1.
    pub fn uniform(&mut self) -> f64 {
        bits_to_open01(self.next_u64())
    }

    /// Uniform index in `0..len`. `len` must be nonzero.
    pub fn index(&mut self, len: usize) -> usize {
        debug_assert!(len > 0);
        ((self.uniform() * len as f64) as usize).min(len - 1)
    }

    pub fn standard_normal(&mut self) -> f64 {
        bits_to_normal(self.next_u64())
    }

    pub fn standard_normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.standard_normal()).collect()
    }
}
