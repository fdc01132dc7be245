// SPDX-License-Identifier: Apache-2.0
//! Plateau escape at loop round-1 scale: 1k dataset, smaller batches.

use encopt_core::design::multiplier_truth_table;
use encopt_core::encoding::Encoding;
use encopt_core::qor::{cpx, minimize_two_level};
use encopt_core::surrogate::{
    finetune, predict_batch, pretrain_ssl, ModelConfig, SurrogateParams, TrainConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
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
    let encodings: Vec<Encoding> = (0..1500).map(|_| Encoding::random(&mut rng)).collect();
    let scores: Vec<f64> = encodings
        .par_iter()
        .map(|e| cpx(&minimize_two_level(&multiplier_truth_table(e))) as f64)
        .collect();
    let dataset: Vec<(Encoding, f64)> =
        encodings[..1000].iter().cloned().zip(scores[..1000].iter().cloned()).collect();

    let base = SurrogateParams::init(ModelConfig::default(), 1);
    let (pretrained, _) =
        pretrain_ssl(&base, &TrainConfig { ssl_epochs: 100, seed: 11, ..Default::default() });

    for (batch, epochs) in [(64usize, 250usize), (128, 250)] {
        let cfg = TrainConfig {
            finetune_epochs: epochs,
            finetune_lr: 1e-3,
            augmentation: true,
            batch_size: batch,
            seed: 5,
            ..Default::default()
        };
        let t = std::time::Instant::now();
        let out = finetune(&pretrained, &dataset, &cfg).unwrap();
        let preds = predict_batch(&out.params, &out.normalizer, &encodings[1000..]);
        let rho = spearman(&preds, &scores[1000..]);
        print!("batch {batch}: {:.0}s", t.elapsed().as_secs_f64());
        for (i, (tr, va)) in out.curve.iter().enumerate() {
            if i % 50 == 0 || i + 1 == out.curve.len() {
                print!(" [ep{i} tr{tr:.2} va{va:.2}]");
            }
        }
        println!(" spearman {rho:.3}");
        std::io::stdout().flush().unwrap();
    }
}
