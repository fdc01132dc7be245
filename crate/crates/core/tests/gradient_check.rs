// SPDX-License-Identifier: Apache-2.0
//! Central finite-difference checks of the analytic gradients, per parameter
//! segment and for the inputs, on both the regression and pretraining paths.

use encopt_core::encoding::SoftTensor;
use encopt_core::surrogate::{
    backward_regression, forward_regression, inputs_from_soft, ModelConfig, SurrogateParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-4;
const TOL: f64 = 1e-4;

// The floor absorbs finite-difference noise on coordinates whose true
// gradient is exactly zero (e.g. the key bias: softmax is invariant to a
// uniform shift of all keys).
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-5)
}

/// Central difference at STEP; when the two step sizes disagree a ReLU kink
/// sits inside the probe window, so the tighter window is the valid estimate.
fn central_diff(mut f: impl FnMut(f64) -> f64) -> f64 {
    let coarse = (f(STEP) - f(-STEP)) / (2.0 * STEP);
    let fine = (f(STEP / 10.0) - f(-STEP / 10.0)) / (2.0 * STEP / 10.0);
    if rel_err(coarse, fine) > TOL / 2.0 {
        fine
    } else {
        coarse
    }
}

fn random_inputs(rng: &mut ChaCha8Rng, batch: usize) -> Vec<SoftTensor> {
    (0..batch)
        .map(|_| SoftTensor::new((0..64).map(|_| rng.gen_range(0.05..0.95)).collect()).unwrap())
        .collect()
}

/// Weighted sum of batch outputs; a scalar loss exercising every sample.
fn loss(p: &SurrogateParams, xs: &[SoftTensor], w: &[f64]) -> f64 {
    let (y, _) = forward_regression(p, inputs_from_soft(xs));
    y.iter().zip(w).map(|(a, b)| a * b).sum()
}

#[test]
fn parameter_gradients_match_finite_differences_per_segment() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut params = SurrogateParams::init(ModelConfig::default(), 40);
    // Perturb away from initialization so layer norms and ReLUs see generic
    // activations.
    for v in params.data_mut() {
        *v += rng.gen_range(-0.01..0.01);
    }
    let xs = random_inputs(&mut rng, 3);
    let w = vec![1.0, -0.7, 0.4];

    let (y, cache) = forward_regression(&params, inputs_from_soft(&xs));
    assert_eq!(y.len(), 3);
    let grads = backward_regression(&params, &cache, &w, true, false);
    let analytic = grads.params.unwrap();

    let layout = params.layout();
    for seg in &layout.segments {
        if seg.name.starts_with("ssl.") {
            continue; // not on the regression path
        }
        if seg.name.contains("layer1") || seg.name.contains("layer2") {
            continue; // one representative encoder layer keeps this fast
        }
        let len = seg.rows * seg.cols;
        let mut worst = 0.0f64;
        for k in 0..10.min(len) {
            let idx = seg.offset + (k * 7919) % len;
            let numeric = central_diff(|h| {
                let mut p = params.clone();
                p.data_mut()[idx] += h;
                loss(&p, &xs, &w)
            });
            worst = worst.max(rel_err(analytic[idx], numeric));
        }
        assert!(worst < TOL, "segment {} worst rel err {worst}", seg.name);
    }
}

#[test]
fn input_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let params = SurrogateParams::init(ModelConfig::default(), 41);
    let xs = random_inputs(&mut rng, 1);

    let (_, cache) = forward_regression(&params, inputs_from_soft(&xs));
    let grads = backward_regression(&params, &cache, &[1.0], false, true);
    let analytic = &grads.inputs.unwrap()[0];

    let mut worst = 0.0f64;
    for k in 0..20 {
        let idx = (k * 13) % 64;
        let numeric = central_diff(|h| {
            let mut v = xs[0].values().to_vec();
            v[idx] += h;
            loss(&params, &[SoftTensor::new(v).unwrap()], &[1.0])
        });
        worst = worst.max(rel_err(analytic[idx], numeric));
    }
    assert!(worst < TOL, "input grads worst rel err {worst}");
}

#[test]
fn ssl_gradients_match_finite_differences() {
    use encopt_core::surrogate::model::{backward_ssl, forward_ssl};

    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let params = SurrogateParams::init(ModelConfig::default(), 42);
    let xs = random_inputs(&mut rng, 2);
    // Fixed random linear functional over the logits as the scalar loss.
    let weights: Vec<f64> = (0..2 * 16 * 16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ssl_loss = |p: &SurrogateParams| -> f64 {
        let (logits, _) = forward_ssl(p, inputs_from_soft(&xs));
        logits.data.iter().zip(&weights).map(|(a, b)| a * b).sum()
    };

    let (logits, cache) = forward_ssl(&params, inputs_from_soft(&xs));
    let dlogits = encopt_core::surrogate::math::Mat::from_vec(logits.rows, logits.cols, weights.clone());
    let analytic = backward_ssl(&params, &cache, &dlogits);

    let layout = params.layout();
    for name in ["ssl.w1", "ssl.w2", "ssl.b1", "layer0.attn.wq", "rowenc.w1", "pos"] {
        let seg = layout.find(name);
        let len = seg.rows * seg.cols;
        let mut worst = 0.0f64;
        for k in 0..8.min(len) {
            let idx = seg.offset + (k * 5209) % len;
            let numeric = central_diff(|h| {
                let mut p = params.clone();
                p.data_mut()[idx] += h;
                ssl_loss(&p)
            });
            worst = worst.max(rel_err(analytic[idx], numeric));
        }
        assert!(worst < TOL, "segment {name} worst rel err {worst}");
    }
}

#[test]
fn ssl_logits_are_permutation_equivariant_without_positions() {
    use encopt_core::surrogate::model::forward_ssl;

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut params = SurrogateParams::init(ModelConfig::default(), 43);
    // Zero the positional vectors; token identity then comes from content
    // alone and permuting rows must permute the per-token logits identically.
    let range = params.layout().range("pos");
    params.data_mut()[range].fill(0.0);

    let x: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
    let perm: Vec<usize> = {
        let mut p: Vec<usize> = (0..16).collect();
        use rand::seq::SliceRandom;
        p.shuffle(&mut rng);
        p
    };
    let mut permuted = vec![0.0; 64];
    for (dst, &src) in perm.iter().enumerate() {
        permuted[dst * 4..dst * 4 + 4].copy_from_slice(&x[src * 4..src * 4 + 4]);
    }

    let (base, _) = forward_ssl(&params, inputs_from_soft(&[SoftTensor::new(x).unwrap()]));
    let (shuffled, _) =
        forward_ssl(&params, inputs_from_soft(&[SoftTensor::new(permuted).unwrap()]));
    for (dst, &src) in perm.iter().enumerate() {
        for j in 0..16 {
            let a = shuffled.row(dst)[j];
            let b = base.row(src)[j];
            assert!((a - b).abs() < 1e-9, "token {dst} logit {j}: {a} vs {b}");
        }
    }

    // With learned positional vectors restored the equivariance must break;
    // that asymmetry is what makes the pretraining task non-trivial.
    let params2 = SurrogateParams::init(ModelConfig::default(), 43);
    let (base2, _) = forward_ssl(&params2, inputs_from_soft(&[SoftTensor::new(
        (0..64).map(|i| (i % 3) as f64 * 0.4).collect(),
    ).unwrap()]));
    let x2: Vec<f64> = (0..64).map(|i| (i % 3) as f64 * 0.4).collect();
    let mut rot = vec![0.0; 64];
    rot[..60].copy_from_slice(&x2[4..]);
    rot[60..].copy_from_slice(&x2[..4]);
    let (rotated, _) = forward_ssl(&params2, inputs_from_soft(&[SoftTensor::new(rot).unwrap()]));
    let differs = (0..16).any(|t| {
        (0..16).any(|j| (rotated.row((t + 15) % 16)[j] - base2.row(t)[j]).abs() > 1e-6)
    });
    assert!(differs);
}
