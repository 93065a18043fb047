//! Seeded deformation-gradient samples and analysis configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mat3::Mat3;

/// Stream tags mixed into the base seed so independent uses never share draws.
pub mod stream {
    pub const HELD_OUT: u64 = 0x48454c44;
    pub const MEMBERSHIP: u64 = 0x4d454d42;
    pub const MULTI_START: u64 = 0x53544152;
    pub const PAIR: u64 = 0x50414952;
}

/// SplitMix64 finalizer over `base ⊕ index`; used to derive per-task seeds.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random generator in `[-1, 1]^{3×3}`.
pub fn random_generator(rng: &mut impl Rng) -> Mat3 {
    Mat3::from_fn(|_, _| rng.random_range(-1.0..=1.0))
}

/// `n` matrices `exp(spread·S)`, the first one being the identity.
///
/// Every sample has `det = exp(spread·tr S) > 0`.
pub fn sample_gl3(n: usize, seed: u64, spread: f64) -> Vec<Mat3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(Mat3::identity());
    for _ in 1..n {
        out.push(random_generator(&mut rng).scale(spread).expm());
    }
    out
}

/// Fresh samples that exclude the identity, for held-out validation.
pub fn held_out_samples(n: usize, seed: u64, spread: f64, stream_tag: u64) -> Vec<Mat3> {
    let mut v = sample_gl3(n + 1, derive_seed(seed, stream_tag), spread);
    v.remove(0);
    v
}

/// Sampling sizes and tolerances shared by the analyses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Deformation-gradient samples per kernel system (also the held-out count).
    pub n_f: usize,
    pub seed: u64,
    pub spread: f64,
    /// Relative singular-value threshold for rank decisions.
    pub tau_rank: f64,
    /// Relative residual accepted on held-out samples.
    pub tau_accept: f64,
    /// Residual accepted for a material isomorphism.
    pub tau_iso: f64,
    /// Fresh samples used by membership tests.
    pub n_validation: usize,
    /// Perturbed starts besides the identity in the isomorphism search.
    pub n_starts: usize,
    pub max_iter: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            n_f: 40,
            seed: 7,
            spread: 0.75,
            tau_rank: 1e-8,
            tau_accept: 1e-6,
            tau_iso: 1e-6,
            n_validation: 20,
            n_starts: 8,
            max_iter: 200,
        }
    }
}

impl AnalysisConfig {
    /// Training samples shared by every kernel variant.
    pub fn training_samples(&self) -> Vec<Mat3> {
        sample_gl3(self.n_f, self.seed, self.spread)
    }

    pub fn held_out_samples(&self) -> Vec<Mat3> {
        held_out_samples(self.n_f, self.seed, self.spread, stream::HELD_OUT)
    }

    /// Human-readable reason the configuration is unusable, if any.
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("spread", self.spread),
            ("tau_rank", self.tau_rank),
            ("tau_accept", self.tau_accept),
            ("tau_iso", self.tau_iso),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.n_f == 0 || self.n_validation == 0 || self.max_iter == 0 {
            return Err("n_f, n_validation and max_iter must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::DET_MIN;

    #[test]
    fn single_sample_is_identity() {
        for seed in [0, 1, 99] {
            assert_eq!(sample_gl3(1, seed, 0.75), vec![Mat3::identity()]);
        }
    }

    #[test]
    fn samples_are_deterministic_and_invertible() {
        let a = sample_gl3(40, 7, 0.75);
        let b = sample_gl3(40, 7, 0.75);
        assert_eq!(a, b);
        assert_eq!(a.len(), 40);
        assert!(a.iter().all(|m| m.det() > DET_MIN));
        assert_ne!(a, sample_gl3(40, 8, 0.75));
    }

    #[test]
    fn held_out_differs_from_training() {
        let cfg = AnalysisConfig::default();
        let train = cfg.training_samples();
        let held = cfg.held_out_samples();
        assert_eq!(held.len(), cfg.n_f);
        assert!(held.iter().all(|h| !train.contains(h)));
    }

    #[test]
    fn derived_seeds_spread() {
        let s: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
    }
}
