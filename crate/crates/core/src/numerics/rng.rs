//! Deterministic random numbers.
//!
//! Generator: xoshiro256** from `rand_xoshiro`, its state filled from the
//! 64-bit seed by SplitMix64. Uniform doubles take the top 53 bits of each
//! output and normals come from `rand_distr`'s ziggurat sampler.
//!
//! Child streams are seeded by `mix_seed(seed, index)` so any `(seed, index)`
//! pair reproduces the same stream regardless of how many other streams were
//! drawn before it.

use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::{SplitMix64, Xoshiro256StarStar};

use crate::numerics::Matrix;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Combines a seed and a stream index into a new seed.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let a = SplitMix64::seed_from_u64(seed ^ index.wrapping_mul(GOLDEN).rotate_left(17)).next_u64();
    SplitMix64::seed_from_u64(a ^ index).next_u64()
}

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: Xoshiro256StarStar,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    /// Generator for stream `index` derived from `seed`.
    pub fn stream(seed: u64, index: u64) -> Self {
        Self::new(mix_seed(seed, index))
    }

    /// Child generator derived from this generator's original seed.
    pub fn child(&self, index: u64) -> Self {
        Self::stream(self.seed, index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        self.inner.random_range(0..n)
    }

    /// Standard normal variate.
    pub fn gaussian(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform random order.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}

/// Matrix of i.i.d. N(0, sigma²) entries, filled row-major.
pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize, sigma: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| sigma * rng.gaussian()).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_seeds_equal_streams() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = Rng::new(8);
        assert_ne!(Rng::new(7).next_u64(), c.next_u64());
    }

    #[test]
    fn child_streams_reproducible_and_distinct() {
        let parent = Rng::new(11);
        let mut c1 = parent.child(3);
        let mut c2 = Rng::stream(11, 3);
        assert_eq!(c1.next_u64(), c2.next_u64());
        assert_ne!(parent.child(3).next_u64(), parent.child(4).next_u64());
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = Rng::new(1);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn gaussian_matrix_zero_sigma_and_determinism() {
        let z = gaussian_matrix(&mut Rng::new(3), 4, 5, 0.0);
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
        let a = gaussian_matrix(&mut Rng::new(3), 4, 5, 1.5);
        let b = gaussian_matrix(&mut Rng::new(3), 4, 5, 1.5);
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_matrix_sample_std() {
        let m = gaussian_matrix(&mut Rng::new(99), 1000, 1000, 2.0);
        let n = m.len() as f64;
        let mean = m.as_slice().iter().sum::<f64>() / n;
        let std = (m.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((1.99..=2.01).contains(&std), "std {std}");
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = Rng::new(5);
        for n in 1..50u64 {
            for _ in 0..20 {
                assert!(rng.below(n) < n);
            }
        }
    }
}
