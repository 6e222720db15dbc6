//! Counter-based per-path random streams.
//!
//! Every path of every estimator draws from a ChaCha stream whose key is
//! derived from `(seed, path_index, stream_tag)`. Results therefore depend
//! only on those three integers, never on scheduling or on how many other
//! paths were sampled before.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::math;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Gaussian stream for one `(seed, path, stream)` triple.
pub struct PathRng {
    inner: ChaCha12Rng,
    spare: Option<f64>,
}

impl PathRng {
    pub fn new(seed: u64, path_index: u64, stream: u32) -> Self {
        let mut state = seed ^ 0x6A09_E667_F3BC_C908;
        let mut key = [0u8; 32];
        let words = [
            splitmix64(&mut state),
            splitmix64(&mut state) ^ path_index.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            splitmix64(&mut state) ^ u64::from(stream).wrapping_mul(0xD134_2543_DE82_EF95),
            splitmix64(&mut state),
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words.iter()) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        Self {
            inner: ChaCha12Rng::from_seed(key),
            spare: None,
        }
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        // 53 random bits; +0.5 keeps the value strictly inside (0, 1).
        let bits = self.inner.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal via Box-Muller, caching the paired draw.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform_open();
        let r = math::sqrt(-2.0 * math::ln(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some(r * math::sin(theta));
        r * math::cos(theta)
    }

    /// Fill `out` with independent `N(0, scale^2)` draws.
    pub fn fill_gaussian(&mut self, out: &mut [f64], scale: f64) {
        for v in out.iter_mut() {
            *v = scale * self.standard_normal();
        }
    }
}
