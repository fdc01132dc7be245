// SPDX-License-Identifier: Apache-2.0
//! Operand stimulus generation: iid normal value pairs, rounded and clipped
//! to the encodable range.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Paper-scale stimulus length.
pub const FULL_STIMULUS_PAIRS: usize = 20_000;
/// Desk-scale default stimulus length.
pub const DESK_STIMULUS_PAIRS: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusConfig {
    pub n_pairs: usize,
    pub sigma: f64,
    pub clip_min: i8,
    pub clip_max: i8,
    pub seed: u64,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        Self {
            n_pairs: DESK_STIMULUS_PAIRS,
            sigma: 3.0,
            clip_min: -8,
            clip_max: 7,
            seed: 0,
        }
    }
}

impl StimulusConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.sigma > 0.0) {
            return Err(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.clip_min < -8 || self.clip_max > 7 || self.clip_min > self.clip_max {
            return Err(format!(
                "clip range [{}, {}] outside encodable range [-8, 7]",
                self.clip_min, self.clip_max
            ));
        }
        Ok(())
    }
}

/// Rounds half away from zero, then clips.
fn quantize(x: f64, lo: i8, hi: i8) -> i8 {
    (x.round() as i64).clamp(lo as i64, hi as i64) as i8
}

/// `n_pairs` iid value pairs, each component Normal(0, sigma) rounded to the
/// nearest integer and clipped to the configured range. Deterministic per seed.
pub fn gen_stimuli(cfg: &StimulusConfig) -> Vec<(i8, i8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.sigma).expect("validated sigma");
    (0..cfg.n_pairs)
        .map(|_| {
            let a = quantize(normal.sample(&mut rng), cfg.clip_min, cfg.clip_max);
            let b = quantize(normal.sample(&mut rng), cfg.clip_min, cfg.clip_max);
            (a, b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_stay_in_range_and_seed_reproduces() {
        let cfg = StimulusConfig { n_pairs: 5000, seed: 77, ..Default::default() };
        let s1 = gen_stimuli(&cfg);
        let s2 = gen_stimuli(&cfg);
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 5000);
        assert!(s1.iter().all(|&(a, b)| (-8..=7).contains(&a) && (-8..=7).contains(&b)));
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(quantize(0.5, -8, 7), 1);
        assert_eq!(quantize(-0.5, -8, 7), -1);
        assert_eq!(quantize(0.49, -8, 7), 0);
        assert_eq!(quantize(7.6, -8, 7), 7);
        assert_eq!(quantize(-9.3, -8, 7), -8);
    }

    /// Abramowitz-Stegun 7.1.26 erf approximation, the independent CDF oracle.
    fn phi(x: f64) -> f64 {
        let t = x / std::f64::consts::SQRT_2;
        let sign = t.signum();
        let t_abs = t.abs();
        let u = 1.0 / (1.0 + 0.3275911 * t_abs);
        let poly = u
            * (0.254829592
                + u * (-0.284496736 + u * (1.421413741 + u * (-1.453152027 + u * 1.061405429))));
        let erf = sign * (1.0 - poly * (-t_abs * t_abs).exp());
        0.5 * (1.0 + erf)
    }

    #[test]
    fn zero_probability_matches_normal_cdf() {
        let cfg = StimulusConfig { n_pairs: 50_000, sigma: 3.0, seed: 3, ..Default::default() };
        let stimuli = gen_stimuli(&cfg);
        let zeros = stimuli
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .filter(|&v| v == 0)
            .count();
        let expected = phi(0.5 / 3.0) - phi(-0.5 / 3.0);
        assert!((expected - 0.1324).abs() < 1e-3, "oracle sanity: {expected}");
        let empirical = zeros as f64 / 100_000.0;
        assert!(
            (empirical - expected).abs() < 0.01,
            "empirical {empirical}, expected {expected}"
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = StimulusConfig { sigma: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.sigma = 3.0;
        cfg.clip_max = 8;
        assert!(cfg.validate().is_err());
    }
}
