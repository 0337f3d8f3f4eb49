//! Deterministic pseudo-random streams.
//!
//! Every piece of randomness in the crate flows through [`RngStream`]:
//! ChaCha8 keyed by a 64-bit master seed, with the ChaCha stream counter
//! carrying the replica index. Substreams with distinct indices never
//! overlap, so a batch of replicas is reproducible independently of how
//! the replicas are scheduled. Uniform doubles and bounded integers are
//! derived here rather than through distribution adapters so the byte
//! mapping is pinned by this crate, not by a dependency's minor version.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Master stream for `seed`; identical to `substream(seed, 0)`.
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    /// Independent stream `index` under `master_seed`.
    pub fn substream(master_seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(index);
        RngStream { rng }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// True with probability `prob`. `prob <= 0` never fires, `prob >= 1`
    /// always does (the uniform lives on [0, 1)).
    #[inline]
    pub fn bernoulli(&mut self, prob: f64) -> bool {
        self.next_f64() < prob
    }

    /// Uniform integer in {1, ..., upper}, unbiased (Lemire rejection).
    #[inline]
    pub fn uniform_1_to(&mut self, upper: u64) -> u64 {
        debug_assert!(upper >= 1);
        let mut x = self.next_u64();
        let mut m = (x as u128) * (upper as u128);
        let mut lo = m as u64;
        if lo < upper {
            let t = upper.wrapping_neg() % upper;
            while lo < t {
                x = self.next_u64();
                m = (x as u128) * (upper as u128);
                lo = m as u64;
            }
        }
        (m >> 64) as u64 + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_differ_and_master_is_stream_zero() {
        let mut s0 = RngStream::substream(7, 0);
        let mut s1 = RngStream::substream(7, 1);
        let mut m = RngStream::new(7);
        let mut any_diff = false;
        for _ in 0..100 {
            let x0 = s0.next_u64();
            any_diff |= x0 != s1.next_u64();
            assert_eq!(x0, m.next_u64());
        }
        assert!(any_diff);
    }

    #[test]
    fn uniform_1_to_covers_range() {
        let mut rng = RngStream::new(3);
        let mut seen = [false; 6];
        for _ in 0..1000 {
            let v = rng.uniform_1_to(6);
            assert!((1..=6).contains(&v));
            seen[(v - 1) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
        // upper = 1 is always 1
        for _ in 0..10 {
            assert_eq!(rng.uniform_1_to(1), 1);
        }
    }

    #[test]
    fn f64_in_unit_interval() {
        let mut rng = RngStream::new(11);
        for _ in 0..10_000 {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn bernoulli_edge_probabilities() {
        let mut rng = RngStream::new(5);
        for _ in 0..100 {
            assert!(!rng.bernoulli(0.0));
            assert!(rng.bernoulli(1.0));
        }
    }
}
