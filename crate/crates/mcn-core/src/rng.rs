//! Deterministic random streams for Monte Carlo trials.
//!
//! Every stochastic routine in this crate draws from a [`Stream`] derived
//! from a `(master_seed, stream_index)` pair, so results are reproducible
//! across runs and across worker counts. The construction is pinned so it
//! can be reimplemented elsewhere:
//!
//! * Generator: ChaCha with 12 rounds (the `rand_chacha` implementation of
//!   the reference ChaCha stream cipher).
//! * Seed: 32 bytes, little-endian `master_seed` in bytes 0..8,
//!   little-endian `stream_index` in bytes 8..16, bytes 16..32 zero.
//! * `next_u64`: two consecutive 32-bit output words, low word first.
//! * `uniform`: `(next_u64 >> 11) * 2^-53`, i.e. 53 random bits mapped to
//!   `[0, 1)`.
//! * `bernoulli(p)`: `uniform() < p` (one draw per event).
//! * `binomial(n, p)`: the count of `n` successive Bernoulli draws.
//! * `gaussian`: Box-Muller, `sqrt(-2 ln(1-u1)) * cos(tau * u2)` from two
//!   successive uniforms (one normal per pair; the sine branch is unused).

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

const TWO_POW_NEG53: f64 = 1.0 / 9007199254740992.0;

/// A seeded random stream with a documented, portable draw sequence.
#[derive(Debug, Clone)]
pub struct Stream {
    inner: ChaCha12Rng,
}

impl Stream {
    /// Derive the substream for `stream_index` under `master_seed`.
    ///
    /// The mapping is injective in `(master_seed, stream_index)`; distinct
    /// indices give statistically independent streams.
    pub fn derive(master_seed: u64, stream_index: u64) -> Self {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&stream_index.to_le_bytes());
        Self {
            inner: ChaCha12Rng::from_seed(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_NEG53
    }

    /// Single Bernoulli event with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Binomial draw as the count of `n` Bernoulli events.
    ///
    /// Linear in `n`, which is fine at the colony sizes simulated here, and
    /// keeps the draw sequence trivially portable.
    pub fn binomial(&mut self, n: u32, p: f64) -> u32 {
        if p <= 0.0 {
            // Still consume no draws: callers rely only on (seed, index).
            return 0;
        }
        if p >= 1.0 {
            return n;
        }
        (0..n).filter(|_| self.bernoulli(p)).count() as u32
    }

    /// Gaussian draw via Box-Muller.
    pub fn gaussian(&mut self, mean: f64, sd: f64) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * (1.0 - u1).ln()).sqrt();
        mean + sd * radius * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_pairs_give_identical_sequences() {
        let mut a = Stream::derive(7, 3);
        let mut b = Stream::derive(7, 3);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_indices_diverge_immediately() {
        let mut a = Stream::derive(5, 0);
        let mut b = Stream::derive(5, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn distinct_seeds_diverge() {
        let mut a = Stream::derive(1, 0);
        let mut b = Stream::derive(2, 0);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    // Pinned draws for seed 42, stream 7. Regenerate only if the stream
    // construction documented in the module header changes.
    #[test]
    fn pinned_draws_seed42_stream7() {
        let mut s = Stream::derive(42, 7);
        let draws = [s.next_u64(), s.next_u64(), s.next_u64()];
        assert_eq!(
            draws,
            [
                0xaee5_a7e4_239a_3f70,
                0x5338_e526_8d08_83c1,
                0x3b91_50ca_fdd6_f2a7,
            ]
        );
    }

    #[test]
    fn uniform_is_in_unit_interval() {
        let mut s = Stream::derive(9, 0);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u), "uniform out of range: {u}");
        }
    }

    #[test]
    fn binomial_degenerate_probabilities() {
        let mut s = Stream::derive(11, 0);
        assert_eq!(s.binomial(50, 0.0), 0);
        assert_eq!(s.binomial(50, 1.0), 50);
    }

    #[test]
    fn gaussian_moments_are_sane() {
        let mut s = Stream::derive(13, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| s.gaussian(2.0, 3.0)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        // 4 standard errors: se(mean) = sd/sqrt(n), se(var) ~ sd^2 sqrt(2/n).
        let se_mean = 3.0 / (n as f64).sqrt();
        let se_var = 9.0 * (2.0 / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 4.0 * se_mean, "mean {mean}");
        assert!((var - 9.0).abs() < 4.0 * se_var, "variance {var}");
    }
}
