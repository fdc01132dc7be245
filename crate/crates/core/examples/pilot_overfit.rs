// SPDX-License-Identifier: Apache-2.0
//! Can the regression path memorize a small oracle set at all?

use encopt_core::design::multiplier_truth_table;
use encopt_core::encoding::Encoding;
use encopt_core::qor::{cpx, minimize_two_level};
use encopt_core::surrogate::{finetune, predict_batch, ModelConfig, SurrogateParams, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let encodings: Vec<Encoding> = (0..128).map(|_| Encoding::random(&mut rng)).collect();
    let scores: Vec<f64> = encodings
        .par_iter()
        .map(|e| cpx(&minimize_two_level(&multiplier_truth_table(e))) as f64)
        .collect();
    let dataset: Vec<(Encoding, f64)> = encodings.iter().cloned().zip(scores.iter().cloned()).collect();

    for (label, seed, lr, epochs) in [
        ("random-init lr1e-3", None, 1e-3, 150),
        ("random-init lr3e-4", None, 3e-4, 150),
    ] {
        let p0 = match seed {
            None => SurrogateParams::init(ModelConfig::default(), 1),
            Some(s) => SurrogateParams::init(ModelConfig::default(), s),
        };
        let cfg = TrainConfig {
            finetune_epochs: epochs,
            finetune_lr: lr,
            augmentation: false,
            batch_size: 64,
            validation_fraction: 0.1,
            seed: 5,
            ..Default::default()
        };
        let out = finetune(&p0, &dataset, &cfg).unwrap();
        let preds = predict_batch(&out.params, &out.normalizer, &encodings);
        let mse_all: f64 = preds
            .iter()
            .zip(&scores)
            .map(|(p, s)| {
                let zn = out.normalizer.normalize(*s);
                let zp = out.normalizer.normalize(*p);
                (zp - zn) * (zp - zn)
            })
            .sum::<f64>()
            / 128.0;
        let (tr0, va0) = out.curve[0];
        let (tr_last, va_last) = *out.curve.last().unwrap();
        println!(
            "{label}: train {tr0:.3}->{tr_last:.4}, val {va0:.3}->{va_last:.3}, full-set standardized mse {mse_all:.4}"
        );
    }
}
