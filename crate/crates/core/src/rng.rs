//! Seeded, platform-stable random streams.
//!
//! Streams are ChaCha8 generators keyed by `seed_from_u64`. The draw sequence
//! depends only on the seed, never on the host. Child streams for parallel
//! work are derived with [`RngStream::fork`], which mixes the parent seed and
//! a caller-supplied key through SplitMix64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for `key`; does not advance `self`.
    pub fn fork(&self, key: u64) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ splitmix64(key)))
    }

    /// Uniform draw in `[lo, hi)`; returns `lo` when `lo == hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::Argument(format!("invalid uniform range [{lo}, {hi})")));
        }
        let u: f64 = self.inner.random();
        if lo == hi {
            return Ok(lo);
        }
        let v = lo + (hi - lo) * u;
        // Rounding can land exactly on `hi` for tiny spans.
        Ok(if v >= hi { lo } else { v })
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn uniform_int(&mut self, lo: u64, hi: u64) -> Result<u64> {
        if lo > hi {
            return Err(Error::Argument(format!("invalid integer range [{lo}, {hi}]")));
        }
        Ok(self.inner.random_range(lo..=hi))
    }

    /// Uniform index in `[0, n)`.
    pub fn index(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::Argument("cannot draw an index from an empty range".into()));
        }
        Ok(self.inner.random_range(0..n))
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> Result<f64> {
        let dist = Normal::new(mean, std_dev)
            .map_err(|e| Error::Argument(format!("normal({mean}, {std_dev}): {e}")))?;
        Ok(dist.sample(&mut self.inner))
    }
}
