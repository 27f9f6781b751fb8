//! Seeded random sampling for property checks and experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::vector::Vector;

/// Deterministic sampler of points, steps and times.
///
/// Backed by ChaCha8, so a given seed yields the same stream on every platform.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
    radius: f64,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self::with_radius(seed, 3.0)
    }

    /// Points are drawn uniformly from `[-radius, radius]^n`.
    pub fn with_radius(seed: u64, radius: f64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            radius,
        }
    }

    /// Independent sampler for sub-stream `index`; used to keep parallel trials
    /// independent of the scheduling order.
    pub fn fork(seed: u64, index: u64, radius: f64) -> Self {
        let mixed = seed ^ index.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        Self::with_radius(mixed, radius)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn vector(&mut self, dim: usize) -> Vector {
        let r = self.radius;
        let coords = (0..dim).map(|_| self.rng.random_range(-r..=r)).collect();
        Vector::new(coords).expect("finite sample")
    }

    /// Uniform in `(0, max]`; an infinite `max` is replaced by `fallback`.
    pub fn step(&mut self, max: f64, fallback: f64) -> f64 {
        let hi = if max.is_finite() { max } else { fallback };
        let u: f64 = self.rng.random_range(0.0..1.0);
        hi * (1.0 - u)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            return lo;
        }
        self.rng.random_range(lo..hi)
    }

    pub fn index(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        self.rng.random_range(lo..=hi_inclusive)
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }
}
