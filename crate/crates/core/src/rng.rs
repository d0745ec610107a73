//! Deterministic random numbers.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, which is specified to be portable across platforms and
//! releases. Unit-interval draws are built from the top 53 bits of
//! `next_u64`, so float sampling does not depend on any distribution code
//! outside this module. Independent streams (per epoch, per record, per
//! parameter tensor) come from [`derive_seed`], a SplitMix64 mix of the
//! master seed with the stream coordinates.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream identified by `parts` under `master`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent generator for a sub-stream of this generator's seed.
    pub fn fork(&self, parts: &[u64]) -> Rng {
        Rng::new(derive_seed(self.seed, parts))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.inner.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<X>(&mut self, items: &mut [X]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Scalar uniform in `[lo, hi)`.
    pub fn uniform_scalar<T: Real>(&mut self, lo: f64, hi: f64) -> T {
        let lo_t = T::lit(lo);
        let hi_t = T::lit(hi);
        loop {
            let v = T::lit(lo + (hi - lo) * self.next_f64());
            // rounding to T can land on hi
            if v >= lo_t && v < hi_t {
                return v;
            }
        }
    }

    /// Tensor of i.i.d. uniform draws in `[lo, hi)`.
    pub fn uniform<T: Real>(&mut self, shape: &[usize], lo: f64, hi: f64) -> Result<Tensor<T>> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::Range(format!("uniform needs lo < hi, got [{lo}, {hi})")));
        }
        let mut t = Tensor::zeros(shape)?;
        for v in t.data_mut() {
            *v = self.uniform_scalar(lo, hi);
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_tensor() {
        let a: Tensor<f32> = Rng::new(42).uniform(&[3, 5], 0.0, 1.0).unwrap();
        let b: Tensor<f32> = Rng::new(42).uniform(&[3, 5], 0.0, 1.0).unwrap();
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let c: Tensor<f32> = Rng::new(43).uniform(&[3, 5], 0.0, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn draws_stay_in_range() {
        let t: Tensor<f32> = Rng::new(7).uniform(&[10_000], 0.0, 1.0).unwrap();
        assert!(t.data().iter().all(|&v| (0.0..1.0).contains(&v)));
        let t: Tensor<f64> = Rng::new(7).uniform(&[1000], -3.0, -2.0).unwrap();
        assert!(t.data().iter().all(|&v| (-3.0..-2.0).contains(&v)));
    }

    #[test]
    fn mean_of_a_million_draws() {
        let t: Tensor<f64> = Rng::new(11).uniform(&[1_000_000], 0.0, 1.0).unwrap();
        let mean = t.sum() / 1e6;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn empty_range_is_an_error() {
        assert!(matches!(
            Rng::new(0).uniform::<f32>(&[2], 1.0, 1.0),
            Err(Error::Range(_))
        ));
        assert!(Rng::new(0).uniform::<f32>(&[2], 2.0, 1.0).is_err());
    }

    #[test]
    fn forked_streams_differ_and_repeat() {
        let base = Rng::new(5);
        let mut a = base.fork(&[1, 2]);
        let mut b = base.fork(&[1, 2]);
        let mut c = base.fork(&[2, 1]);
        let (x, y, z) = (a.next_u64(), b.next_u64(), c.next_u64());
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn below_covers_range() {
        let mut rng = Rng::new(3);
        let mut seen = [0usize; 5];
        for _ in 0..5000 {
            seen[rng.below(5)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
    }
}
