// SPDX-License-Identifier: Apache-2.0
//! Candidate generation from a trained surrogate: gradient inversion of the
//! frozen model with attraction/repulsion regularization, greedy legalization
//! of the relaxed tensors, over-generation with best-predicted selection, and
//! the generate-and-filter baseline.

use crate::encoding::{canonical_form, Encoding, SoftTensor, VALUE_COUNT, WORD_BITS};
use crate::surrogate::{
    backward_regression, forward_regression, inputs_from_soft, predict_batch, Adam,
    ScoreNormalizer, SurrogateParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub n_candidates: usize,
    pub epochs: usize,
    pub init_value: f64,
    pub init_noise_std: f64,
    /// Regularization weight after ramp-up.
    pub lambda: f64,
    /// Epochs over which lambda ramps linearly from zero.
    pub ramp_epochs: usize,
    /// Repulsion kernel temperature.
    pub tau: f64,
    pub lr: f64,
    /// Fraction of legalized candidates kept after ranking by predicted score.
    pub keep_fraction: f64,
    pub seed: u64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            n_candidates: 64,
            epochs: 1500,
            init_value: 0.5,
            init_noise_std: 0.05,
            lambda: 0.1,
            ramp_epochs: 500,
            tau: 0.25,
            lr: 0.05,
            keep_fraction: 0.25,
            seed: 0,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(format!("keep fraction must be in (0,1], got {}", self.keep_fraction));
        }
        if self.epochs == 0 {
            return Err("epochs must be positive".into());
        }
        if !(self.tau > 0.0) {
            return Err(format!("tau must be positive, got {}", self.tau));
        }
        Ok(())
    }

    fn lambda_at(&self, epoch: usize) -> f64 {
        if self.ramp_epochs == 0 {
            return self.lambda;
        }
        self.lambda * ((epoch as f64 + 1.0) / self.ramp_epochs as f64).min(1.0)
    }
}

const N_CODES: usize = VALUE_COUNT;

/// Mean over rows of the squared distance to the nearest binary code word.
/// Zero exactly when every row sits on a code.
pub fn attraction(x: &[f64]) -> f64 {
    (0..VALUE_COUNT)
        .map(|i| nearest_code_dist2(&x[i * WORD_BITS..(i + 1) * WORD_BITS]).0)
        .sum::<f64>()
        / VALUE_COUNT as f64
}

fn nearest_code_dist2(row: &[f64]) -> (f64, u8) {
    let mut best = (f64::INFINITY, 0u8);
    for code in 0..N_CODES as u8 {
        let d = code_dist2(row, code);
        if d < best.0 {
            best = (d, code);
        }
    }
    best
}

fn code_dist2(row: &[f64], code: u8) -> f64 {
    (0..WORD_BITS)
        .map(|j| {
            let bit = f64::from(code >> (WORD_BITS - 1 - j) & 1);
            (row[j] - bit) * (row[j] - bit)
        })
        .sum()
}

/// Mean Gaussian-kernel similarity over row pairs; maximal (1) when all rows
/// coincide, vanishing as rows separate.
pub fn repulsion(x: &[f64], tau: f64) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0.0;
    for i in 0..VALUE_COUNT {
        for j in i + 1..VALUE_COUNT {
            let d2: f64 = (0..WORD_BITS)
                .map(|c| {
                    let d = x[i * WORD_BITS + c] - x[j * WORD_BITS + c];
                    d * d
                })
                .sum();
            total += (-d2 / tau).exp();
            pairs += 1.0;
        }
    }
    total / pairs
}

/// Analytic gradient of lambda * (attraction + repulsion), added into `grad`.
fn regularizer_grad(x: &[f64], tau: f64, lambda: f64, grad: &mut [f64]) {
    // Attraction: each row pulls toward its nearest code (first code wins on
    // exact ties, matching nearest_code_dist2's scan order).
    for i in 0..VALUE_COUNT {
        let row = &x[i * WORD_BITS..(i + 1) * WORD_BITS];
        let (_, code) = nearest_code_dist2(row);
        for j in 0..WORD_BITS {
            let bit = f64::from(code >> (WORD_BITS - 1 - j) & 1);
            grad[i * WORD_BITS + j] += lambda * 2.0 * (row[j] - bit) / VALUE_COUNT as f64;
        }
    }
    // Repulsion.
    let pairs = (VALUE_COUNT * (VALUE_COUNT - 1) / 2) as f64;
    for i in 0..VALUE_COUNT {
        for j in i + 1..VALUE_COUNT {
            let mut d2 = 0.0;
            for c in 0..WORD_BITS {
                let d = x[i * WORD_BITS + c] - x[j * WORD_BITS + c];
                d2 += d * d;
            }
            let w = (-d2 / tau).exp() * (-2.0 / tau) / pairs * lambda;
            for c in 0..WORD_BITS {
                let d = x[i * WORD_BITS + c] - x[j * WORD_BITS + c];
                grad[i * WORD_BITS + c] += w * d;
                grad[j * WORD_BITS + c] -= w * d;
            }
        }
    }
}

/// Full inversion loss at a given ramped lambda: predicted score plus the
/// weighted attraction and repulsion terms.
pub fn inversion_loss(
    p: &SurrogateParams,
    x: &SoftTensor,
    cfg: &InversionConfig,
    lambda: f64,
) -> f64 {
    let score = crate::surrogate::forward_scalar(p, x);
    score + lambda * (attraction(x.values()) + repulsion(x.values(), cfg.tau))
}

/// Outcome of one inversion run.
#[derive(Debug, Clone)]
pub struct InversionResult {
    pub tensors: Vec<SoftTensor>,
    /// Candidates dropped because their loss went non-finite.
    pub aborted: usize,
    /// (epoch, mean finite loss) sampled every 100 epochs, for diagnostics.
    pub trajectory: Vec<(usize, f64)>,
    /// Mean predicted score of the initial and of the surviving final tensors.
    pub initial_mean_score: f64,
    pub final_mean_score: f64,
}

/// Gradient inversion: `n_candidates` tensors start at `init_value` plus
/// Gaussian noise and descend the inversion loss with the model frozen.
/// Candidates whose loss turns non-finite are aborted and reported; the rest
/// continue.
pub fn invert(p: &SurrogateParams, cfg: &InversionConfig) -> InversionResult {
    cfg.validate().expect("valid inversion config");
    let n = cfg.n_candidates;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x1171));
    let noise = Normal::new(0.0, cfg.init_noise_std).expect("positive noise std");
    let grid = VALUE_COUNT * WORD_BITS;
    let mut xs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..grid).map(|_| cfg.init_value + noise.sample(&mut rng)).collect())
        .collect();
    let mut alive: Vec<bool> = vec![true; n];
    let mut optimizers: Vec<Adam> = (0..n).map(|_| Adam::new(grid, cfg.lr)).collect();
    let mut trajectory = Vec::new();

    let batch_scores = |xs: &[Vec<f64>]| -> Vec<f64> {
        let tensors: Vec<SoftTensor> =
            xs.iter().map(|v| SoftTensor::new(v.clone()).expect("finite")).collect();
        let (y, _) = forward_regression(p, inputs_from_soft(&tensors));
        y
    };
    let initial_mean_score = mean(&batch_scores(&xs));

    for epoch in 0..cfg.epochs {
        let lambda = cfg.lambda_at(epoch);
        let idx: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
        if idx.is_empty() {
            break;
        }
        let tensors: Vec<SoftTensor> = idx
            .iter()
            .map(|&i| SoftTensor::new(xs[i].clone()).expect("alive candidates stay finite"))
            .collect();
        let (scores, cache) = forward_regression(p, inputs_from_soft(&tensors));
        let dy = vec![1.0; idx.len()];
        let grads = backward_regression(p, &cache, &dy, false, true);
        let input_grads = grads.inputs.expect("input grads requested");

        let mut loss_sum = 0.0;
        let mut loss_count = 0.0;
        for (slot, &i) in idx.iter().enumerate() {
            let mut g = input_grads[slot].clone();
            regularizer_grad(&xs[i], cfg.tau, lambda, &mut g);
            let loss =
                scores[slot] + lambda * (attraction(&xs[i]) + repulsion(&xs[i], cfg.tau));
            if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                alive[i] = false;
                continue;
            }
            loss_sum += loss;
            loss_count += 1.0;
            optimizers[i].step(&mut xs[i], &g);
            if xs[i].iter().any(|v| !v.is_finite()) {
                alive[i] = false;
            }
        }
        if epoch % 100 == 0 && loss_count > 0.0 {
            trajectory.push((epoch, loss_sum / loss_count));
        }
    }

    let tensors: Vec<SoftTensor> = (0..n)
        .filter(|&i| alive[i])
        .map(|i| SoftTensor::new(xs[i].clone()).expect("finite"))
        .collect();
    let final_mean_score = if tensors.is_empty() {
        f64::NAN
    } else {
        let (y, _) = forward_regression(p, inputs_from_soft(&tensors));
        mean(&y)
    };
    InversionResult {
        aborted: alive.iter().filter(|a| !**a).count(),
        tensors,
        trajectory,
        initial_mean_score,
        final_mean_score,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Greedy legalization: rows sitting exactly on a distinct code are pinned
/// first; the remaining (row, code) pairs are assigned in ascending squared
/// distance, ties broken by row index then code value. Total on any finite
/// grid and always legal.
pub fn legalize(x: &SoftTensor) -> Encoding {
    let vals = x.values();
    let mut row_of_code: [Option<u8>; N_CODES] = [None; N_CODES];
    let mut code_of_row: [Option<u8>; VALUE_COUNT] = [None; VALUE_COUNT];

    // Pin exact binary rows to their codes.
    for i in 0..VALUE_COUNT {
        let row = &vals[i * WORD_BITS..(i + 1) * WORD_BITS];
        if row.iter().all(|&v| v == 0.0 || v == 1.0) {
            let code = row.iter().fold(0u8, |acc, &v| (acc << 1) | (v as u8));
            if row_of_code[code as usize].is_none() {
                row_of_code[code as usize] = Some(i as u8);
                code_of_row[i] = Some(code);
            }
        }
    }

    // Greedy minimum-distance assignment of what remains.
    loop {
        let mut best: Option<(f64, usize, u8)> = None;
        for i in 0..VALUE_COUNT {
            if code_of_row[i].is_some() {
                continue;
            }
            let row = &vals[i * WORD_BITS..(i + 1) * WORD_BITS];
            for code in 0..N_CODES as u8 {
                if row_of_code[code as usize].is_some() {
                    continue;
                }
                let d = code_dist2(row, code);
                // Strict less-than keeps the earliest (row, code) on ties.
                if best.map_or(true, |(bd, _, _)| d < bd) {
                    best = Some((d, i, code));
                }
            }
        }
        let Some((_, i, code)) = best else { break };
        code_of_row[i] = Some(code);
        row_of_code[code as usize] = Some(i as u8);
    }

    let rows: [u8; VALUE_COUNT] =
        core::array::from_fn(|i| code_of_row[i].expect("all rows assigned"));
    Encoding::from_rows(rows).expect("assignment is a bijection")
}

/// A recommendation batch: encodings with their predicted scores, ascending.
#[derive(Debug, Clone)]
pub struct Recommendation {
    pub encodings: Vec<Encoding>,
    pub predicted: Vec<f64>,
    /// True when fewer distinct candidates than requested were available.
    pub short: bool,
    /// Raw candidates attempted before dedup/selection.
    pub attempted: usize,
    pub inversion: Option<InversionResult>,
}

/// Inversion-based recommendation: over-generate `ceil(n_out/keep_fraction)`
/// candidates, legalize, dedup by canonical form, rank by predicted score and
/// keep the best `n_out`.
pub fn recommend_inversion(
    p: &SurrogateParams,
    normalizer: &ScoreNormalizer,
    n_out: usize,
    cfg: &InversionConfig,
) -> Recommendation {
    let n_attempt = (n_out as f64 / cfg.keep_fraction).ceil() as usize;
    let inv = invert(p, &InversionConfig { n_candidates: n_attempt, ..cfg.clone() });
    let legalized: Vec<Encoding> = inv.tensors.iter().map(legalize).collect();
    let mut rec = select_top(p, normalizer, legalized, n_out);
    rec.attempted = n_attempt;
    rec.inversion = Some(inv);
    rec
}

/// Generate-and-filter baseline: score a uniform random pool and keep the
/// best `n_out` by predicted score.
pub fn recommend_naive<R: Rng>(
    p: &SurrogateParams,
    normalizer: &ScoreNormalizer,
    pool_size: usize,
    n_out: usize,
    rng: &mut R,
) -> Recommendation {
    let pool: Vec<Encoding> = (0..pool_size).map(|_| Encoding::random(rng)).collect();
    let mut rec = select_top(p, normalizer, pool, n_out);
    rec.attempted = pool_size;
    rec
}

fn select_top(
    p: &SurrogateParams,
    normalizer: &ScoreNormalizer,
    candidates: Vec<Encoding>,
    n_out: usize,
) -> Recommendation {
    // Dedup by orbit, keeping the canonical representative.
    let mut seen = std::collections::HashSet::new();
    let mut distinct: Vec<Encoding> = Vec::new();
    for e in candidates {
        let canon = canonical_form(&e);
        if seen.insert(canon.packed()) {
            distinct.push(canon);
        }
    }
    let predicted = predict_batch(p, normalizer, &distinct);
    let mut order: Vec<usize> = (0..distinct.len()).collect();
    order.sort_by(|&a, &b| predicted[a].total_cmp(&predicted[b]).then(a.cmp(&b)));
    order.truncate(n_out);
    let short = order.len() < n_out;
    Recommendation {
        encodings: order.iter().map(|&i| distinct[i]).collect(),
        predicted: order.iter().map(|&i| predicted[i]).collect(),
        short,
        attempted: 0,
        inversion: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::ModelConfig;
    use proptest::prelude::*;

    #[test]
    fn attraction_is_zero_on_legal_binary_grids() {
        let e = Encoding::two_complement();
        assert_eq!(attraction(SoftTensor::from(&e).values()), 0.0);
    }

    #[test]
    fn repulsion_is_maximal_when_rows_coincide() {
        let same = vec![0.5; 64];
        assert!((repulsion(&same, 0.25) - 1.0).abs() < 1e-12);
        let spread: Vec<f64> = SoftTensor::from(&Encoding::two_complement()).values().to_vec();
        assert!(repulsion(&spread, 0.25) < 1.0);
    }

    #[test]
    fn zero_lambda_reduces_loss_to_the_score() {
        let p = SurrogateParams::init(ModelConfig::default(), 3);
        let x = SoftTensor::from(&Encoding::sign_magnitude());
        let cfg = InversionConfig::default();
        let loss = inversion_loss(&p, &x, &cfg, 0.0);
        assert_eq!(loss, crate::surrogate::forward_scalar(&p, &x));
    }

    #[test]
    fn regularizer_gradient_matches_finite_differences() {
        let mut vals: Vec<f64> = (0..64).map(|i| 0.3 + 0.01 * (i as f64)).collect();
        vals[5] = 0.9;
        let tau = 0.25;
        let lambda = 0.7;
        let mut analytic = vec![0.0; 64];
        regularizer_grad(&vals, tau, lambda, &mut analytic);
        let f = |v: &[f64]| lambda * (attraction(v) + repulsion(v, tau));
        for idx in [0usize, 7, 13, 31, 63] {
            let h = 1e-6;
            let mut up = vals.clone();
            up[idx] += h;
            let mut down = vals.clone();
            down[idx] -= h;
            let numeric = (f(&up) - f(&down)) / (2.0 * h);
            assert!(
                (numeric - analytic[idx]).abs() < 1e-6,
                "idx {idx}: {numeric} vs {}",
                analytic[idx]
            );
        }
    }

    #[test]
    fn legalize_is_identity_on_legal_encodings() {
        let e = Encoding::sign_magnitude();
        assert_eq!(legalize(&SoftTensor::from(&e)), e);
    }

    #[test]
    fn legalize_total_tie_is_deterministic() {
        // All rows 0.5: every (row, code) pair ties, so assignment follows
        // (row index, code value) ascending: row i gets code i.
        let x = SoftTensor::new(vec![0.5; 64]).unwrap();
        let e = legalize(&x);
        let expected: [u8; 16] = core::array::from_fn(|i| i as u8);
        assert_eq!(e.rows(), &expected);
    }

    #[test]
    fn invert_never_mutates_the_model() {
        let p = SurrogateParams::init(ModelConfig::default(), 9);
        let snapshot = p.clone();
        let cfg = InversionConfig { n_candidates: 4, epochs: 30, seed: 5, ..Default::default() };
        let a = invert(&p, &cfg);
        assert_eq!(p, snapshot);
        let b = invert(&p, &cfg);
        assert_eq!(a.tensors, b.tensors); // same seed, same result
        assert_eq!(a.aborted, 0);
    }

    #[test]
    fn inversion_improves_the_predicted_score() {
        let p = SurrogateParams::init(ModelConfig::default(), 21);
        let cfg = InversionConfig { n_candidates: 8, epochs: 120, seed: 3, ..Default::default() };
        let out = invert(&p, &cfg);
        assert!(
            out.final_mean_score < out.initial_mean_score,
            "{} !< {}",
            out.final_mean_score,
            out.initial_mean_score
        );
        assert!(!out.trajectory.is_empty());
    }

    #[test]
    fn recommend_inversion_attempts_by_keep_fraction() {
        let p = SurrogateParams::init(ModelConfig::default(), 33);
        let normalizer = ScoreNormalizer { mean: 0.0, std: 1.0 };
        let cfg =
            InversionConfig { epochs: 40, keep_fraction: 0.25, seed: 7, ..Default::default() };
        let rec = recommend_inversion(&p, &normalizer, 10, &cfg);
        assert_eq!(rec.attempted, 40); // 10 / 0.25
        assert!(rec.encodings.len() <= 10);
        // All outputs legal and orbit-distinct.
        let mut keys: Vec<u64> =
            rec.encodings.iter().map(|e| canonical_form(e).packed()).collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), rec.encodings.len());
    }

    #[test]
    fn recommend_naive_selection_is_the_pool_minimum() {
        use rand::SeedableRng;
        let p = SurrogateParams::init(ModelConfig::default(), 12);
        let normalizer = ScoreNormalizer { mean: 0.0, std: 1.0 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let rec = recommend_naive(&p, &normalizer, 50, 5, &mut rng);
        assert_eq!(rec.encodings.len(), 5);
        assert!(!rec.short);
        assert!(rec.predicted.windows(2).all(|w| w[0] <= w[1]));

        // n_out = pool size returns the whole deduped pool.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let all = recommend_naive(&p, &normalizer, 50, 50, &mut rng);
        // 50 draws from 16! encodings collide with negligible probability.
        assert_eq!(all.encodings.len(), 50);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn legalize_output_is_always_legal(seed in 0u64..10_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..64).map(|_| rng.gen_range(-0.5..1.5)).collect();
            let e = legalize(&SoftTensor::new(vals).unwrap());
            let grid: Vec<Vec<u8>> = e.to_grid().iter().map(|r| r.to_vec()).collect();
            prop_assert_eq!(crate::encoding::is_legal(&grid), Ok(true));
        }
    }
}
