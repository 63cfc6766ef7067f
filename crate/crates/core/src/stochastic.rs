//! Seeded random-number provisioning and timer distributions.
//!
//! Every simulation draws from a [`RandomSource`], a ChaCha8 stream keyed by
//! a master seed and a list of labels (sweep point, trial index, ...). The
//! key derivation is a SplitMix64 fold, so sub-streams can be created in any
//! order, on any thread, and always yield the same draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Durations are milliseconds throughout the crate.
pub type Millis = f64;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit stream key from a master seed and a label path.
pub fn derive_key(master: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix64(master), |acc, &label| {
        splitmix64(acc ^ splitmix64(label))
    })
}

/// Master seed from which all sub-streams of an experiment are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSequence {
    master: u64,
}

impl SeedSequence {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Independent source for the given label path, e.g. `[point, trial]`.
    pub fn substream(&self, labels: &[u64]) -> RandomSource {
        RandomSource::from_key(derive_key(self.master, labels))
    }
}

/// Single-owner random stream.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn from_seed(seed: u64) -> Self {
        Self::from_key(derive_key(seed, &[]))
    }

    fn from_key(key: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(key),
        }
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

/// Duration with mean and symmetric uniform perturbation, clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedTimer {
    mean: Millis,
    perturbation: Millis,
}

impl PerturbedTimer {
    pub fn new(mean: Millis, perturbation: Millis) -> Result<Self> {
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "mean",
                reason: format!("must be a finite value >= 0, got {mean}"),
            });
        }
        if !(perturbation.is_finite() && perturbation >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "perturbation",
                reason: format!("must be a finite value >= 0, got {perturbation}"),
            });
        }
        Ok(Self { mean, perturbation })
    }

    /// Degenerate timer that always yields `value`.
    pub fn fixed(value: Millis) -> Result<Self> {
        Self::new(value, 0.0)
    }

    pub fn mean(&self) -> Millis {
        self.mean
    }

    pub fn perturbation(&self) -> Millis {
        self.perturbation
    }

    pub fn with_mean(self, mean: Millis) -> Result<Self> {
        Self::new(mean, self.perturbation)
    }

    /// Support of the sampled values after clamping.
    pub fn support(&self) -> (Millis, Millis) {
        (
            (self.mean - self.perturbation).max(0.0),
            self.mean + self.perturbation,
        )
    }

    /// Maps a uniform `u` in `[0, 1)` onto the timer distribution.
    pub fn from_uniform(&self, u: f64) -> Millis {
        (self.mean + self.perturbation * (2.0 * u - 1.0)).max(0.0)
    }
}

/// Draws a perturbed duration. Always consumes exactly one uniform, so the
/// draw sequence does not depend on whether a timer is degenerate.
pub fn sample_perturbed(timer: &PerturbedTimer, rng: &mut RandomSource) -> Millis {
    if timer.perturbation == 0.0 {
        rng.uniform();
        return timer.mean;
    }
    timer.from_uniform(rng.uniform())
}

/// Exponentially distributed duration with the given rate (1/ms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialTimer {
    rate: f64,
}

impl ExponentialTimer {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter {
                name: "rate",
                reason: format!("must be finite and > 0, got {rate}"),
            });
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mean(&self) -> Millis {
        1.0 / self.rate
    }

    /// Inverse CDF at `u` in `[0, 1)`.
    pub fn from_uniform(&self, u: f64) -> Millis {
        -(1.0 - u).ln() / self.rate
    }
}

pub fn sample_exponential(timer: &ExponentialTimer, rng: &mut RandomSource) -> Millis {
    timer.from_uniform(rng.uniform())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_timer_returns_mean() {
        let t = PerturbedTimer::new(50.0, 0.0).unwrap();
        let mut rng = RandomSource::from_seed(3);
        for _ in 0..100 {
            assert_eq!(sample_perturbed(&t, &mut rng), 50.0);
        }
    }

    #[test]
    fn access_link_timer_stays_in_support() {
        let t = PerturbedTimer::new(2.0, 1.0).unwrap();
        let mut rng = RandomSource::from_seed(7);
        for _ in 0..10_000 {
            let x = sample_perturbed(&t, &mut rng);
            assert!((1.0..=3.0).contains(&x), "{x}");
        }
    }

    /// Trapezoid rule on the density of the clamped uniform.
    fn clamped_uniform_mean(mean: f64, xi: f64) -> f64 {
        let (lo, hi) = (mean - xi, mean + xi);
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let f = |x: f64| x.max(0.0) / (hi - lo);
        let inner: f64 = (1..n).map(|i| f(lo + i as f64 * h)).sum();
        h * (0.5 * f(lo) + inner + 0.5 * f(hi))
    }

    #[test]
    fn clamped_timer_is_never_negative_and_matches_integrated_mean() {
        let t = PerturbedTimer::new(1.0, 5.0).unwrap();
        let expected = clamped_uniform_mean(1.0, 5.0);
        assert!((expected - 1.8).abs() < 1e-6);
        let mut rng = RandomSource::from_seed(11);
        let n = 100_000;
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        for _ in 0..n {
            let x = sample_perturbed(&t, &mut rng);
            min = min.min(x);
            sum += x;
        }
        assert!(min >= 0.0);
        assert!(((sum / n as f64) - expected).abs() < 0.03);
    }

    #[test]
    fn exponential_median_is_ln2() {
        let t = ExponentialTimer::new(1.0).unwrap();
        assert!((t.from_uniform(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn exponential_mean_converges() {
        let t = ExponentialTimer::new(0.1).unwrap();
        let mut rng = RandomSource::from_seed(5);
        let n = 1_000_000;
        let sum: f64 = (0..n).map(|_| sample_exponential(&t, &mut rng)).sum();
        let mean = sum / n as f64;
        assert!((mean - 10.0).abs() / 10.0 < 0.01, "{mean}");
    }

    #[test]
    fn exponential_rejects_non_positive_rate() {
        assert!(ExponentialTimer::new(0.0).is_err());
        assert!(ExponentialTimer::new(-1.0).is_err());
        assert!(ExponentialTimer::new(f64::NAN).is_err());
    }

    #[test]
    fn perturbed_rejects_negative_parameters() {
        assert!(PerturbedTimer::new(-1.0, 0.0).is_err());
        assert!(PerturbedTimer::new(1.0, -0.5).is_err());
    }

    #[test]
    fn substreams_are_order_independent() {
        let seeds = SeedSequence::new(42);
        let forward: Vec<f64> = (0..8).map(|i| seeds.substream(&[i]).uniform()).collect();
        let backward: Vec<f64> = (0..8)
            .rev()
            .map(|i| seeds.substream(&[i]).uniform())
            .collect();
        let reversed: Vec<f64> = backward.into_iter().rev().collect();
        assert_eq!(forward, reversed);
        assert_ne!(forward[0], forward[1]);
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RandomSource::from_seed(9);
        let mut b = RandomSource::from_seed(9);
        for _ in 0..1000 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn samples_respect_support(mean in 0.0f64..200.0, xi in 0.0f64..100.0, seed: u64) {
                let t = PerturbedTimer::new(mean, xi).unwrap();
                let (lo, hi) = t.support();
                let mut rng = RandomSource::from_seed(seed);
                for _ in 0..64 {
                    let x = sample_perturbed(&t, &mut rng);
                    prop_assert!(x >= 0.0);
                    prop_assert!(x >= lo && x <= hi);
                }
            }
        }
    }
}
