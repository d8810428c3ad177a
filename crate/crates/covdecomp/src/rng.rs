//! Repo-standard random number generation.
//!
//! All randomness flows through [`RngStream`], a thin wrapper around the
//! ChaCha8 counter-based stream cipher, which is fully specified and produces
//! identical streams on every platform. Normal variates come from the
//! Box-Muller transform on uniforms in (0, 1], and derived seeds come from a
//! splitmix64 mix so that replicate streams are independent and reproducible.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic seedable generator used everywhere in the crate.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Substream for a derived task, e.g. one replicate of an experiment.
    pub fn substream(seed: u64, index: u64) -> Self {
        Self::from_seed(derive_seed(seed, &[index]))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in (0, 1]: 53 random mantissa bits, never exactly zero.
    pub fn uniform(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal via Box-Muller; generates variates in pairs.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Unbiased integer in `0..bound` via rejection sampling.
    pub fn pick(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "pick bound must be positive");
        let bound = bound as u64;
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % bound) as usize;
            }
        }
    }

    /// +1.0 or -1.0 with equal probability.
    pub fn sign(&mut self) -> f64 {
        if self.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Partial Fisher-Yates: shuffles the first `k` positions of `items`,
    /// so `items[..k]` is a uniform sample without replacement.
    pub fn shuffle_prefix<T>(&mut self, items: &mut [T], k: usize) {
        let n = items.len();
        let k = k.min(n);
        for i in 0..k {
            let j = i + self.pick(n - i);
            items.swap(i, j);
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Derive a per-task seed as `seed XOR hash(parts)`, with the hash built by
/// chaining splitmix64 over the parts.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut h = 0x243F6A8885A308D3_u64; // arbitrary nonzero start
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    seed ^ h
}
