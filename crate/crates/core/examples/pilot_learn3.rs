// SPDX-License-Identifier: Apache-2.0
//! Long-horizon finetune: does augmented training ever find the invariant
//! signal? Logs the validation curve as it goes.

use encopt_core::design::multiplier_truth_table;
use encopt_core::encoding::Encoding;
use encopt_core::qor::{cpx, minimize_two_level};
use encopt_core::surrogate::{
    finetune, predict_batch, pretrain_ssl, ModelConfig, SurrogateParams, TrainConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va.sqrt() * vb.sqrt())
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let encodings: Vec<Encoding> = (0..3000).map(|_| Encoding::random(&mut rng)).collect();
    let scores: Vec<f64> = encodings
        .par_iter()
        .map(|e| cpx(&minimize_two_level(&multiplier_truth_table(e))) as f64)
        .collect();
    let dataset: Vec<(Encoding, f64)> =
        encodings[..2500].iter().cloned().zip(scores[..2500].iter().cloned()).collect();

    let base = SurrogateParams::init(ModelConfig::default(), 1);
    let (pretrained, _) =
        pretrain_ssl(&base, &TrainConfig { ssl_epochs: 100, seed: 11, ..Default::default() });

    let cfg = TrainConfig {
        finetune_epochs: 300,
        finetune_lr: 1e-3,
        augmentation: true,
        batch_size: 256,
        seed: 5,
        ..Default::default()
    };
    let out = finetune(&pretrained, &dataset, &cfg).unwrap();
    for (i, (tr, va)) in out.curve.iter().enumerate() {
        if i % 20 == 0 || i + 1 == out.curve.len() {
            println!("epoch {i}: train {tr:.4} val {va:.4}");
        }
    }
    let preds = predict_batch(&out.params, &out.normalizer, &encodings[2500..]);
    println!("holdout spearman {:.3}", spearman(&preds, &scores[2500..]));
}
