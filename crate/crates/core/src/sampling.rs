//! Seeded generation of generic spectral arguments.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Debug, Clone)]
pub struct ArgSampler {
    rng: ChaCha8Rng,
}

impl ArgSampler {
    pub fn new(seed: u64) -> Self {
        ArgSampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    /// Point with modulus in [r_lo, r_hi) and uniform phase.
    pub fn annulus(&mut self, r_lo: f64, r_hi: f64) -> C64 {
        let r = self.uniform(r_lo, r_hi);
        let th = self.uniform(0.0, 2.0 * std::f64::consts::PI);
        C64::from_polar(r, th)
    }

    /// Spectral parameter z away from 0 and from the unit circle's special points.
    pub fn spectral(&mut self) -> C64 {
        self.annulus(0.45, 1.45)
    }

    /// Square root of a generic μ.
    pub fn mu_sqrt(&mut self) -> C64 {
        self.annulus(0.8, 1.25)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
