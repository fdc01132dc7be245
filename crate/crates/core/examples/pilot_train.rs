// SPDX-License-Identifier: Apache-2.0
//! Training pilots: throughput, pretraining accuracy, held-out ranking
//! quality on oracle data.

use encopt_core::design::multiplier_truth_table;
use encopt_core::encoding::{Encoding, SoftTensor};
use encopt_core::qor::{cpx, minimize_two_level};
use encopt_core::surrogate::{
    backward_regression, finetune, forward_regression, inputs_from_soft, predict_batch,
    pretrain_ssl, ModelConfig, SurrogateParams, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

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
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va.sqrt() * vb.sqrt())
}

fn main() {
    // 1. Raw fwd+bwd throughput at batch 256.
    let params = SurrogateParams::init(ModelConfig::default(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let batch: Vec<SoftTensor> = (0..256)
        .map(|_| SoftTensor::new((0..64).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap())
        .collect();
    let start = Instant::now();
    let reps = 20;
    for _ in 0..reps {
        let (y, cache) = forward_regression(&params, inputs_from_soft(&batch));
        let dy: Vec<f64> = y.iter().map(|_| 1.0 / 256.0).collect();
        let _ = backward_regression(&params, &cache, &dy, true, false);
    }
    let sps = (reps * 256) as f64 / start.elapsed().as_secs_f64();
    println!("fwd+bwd(params): {sps:.0} samples/s");

    let start = Instant::now();
    for _ in 0..reps {
        let (y, cache) = forward_regression(&params, inputs_from_soft(&batch));
        let dy: Vec<f64> = y.iter().map(|_| 1.0 / 256.0).collect();
        let _ = backward_regression(&params, &cache, &dy, false, true);
    }
    let sps_inv = (reps * 256) as f64 / start.elapsed().as_secs_f64();
    println!("fwd+bwd(inputs only): {sps_inv:.0} samples/s");

    // 2. SSL pretraining at spec scale.
    let cfg = TrainConfig { seed: 11, ..Default::default() };
    let start = Instant::now();
    let (pretrained, report) = pretrain_ssl(&params, &cfg);
    println!(
        "ssl: 200 epochs x 256 in {:.1}s, loss {:.3} -> {:.4}, holdout acc {:.4}",
        start.elapsed().as_secs_f64(),
        report.epoch_loss[0],
        report.epoch_loss.last().unwrap(),
        report.holdout_accuracy
    );

    // 3. Oracle dataset of 3000 encodings and a finetune quality check.
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let encodings: Vec<Encoding> = (0..3000).map(|_| Encoding::random(&mut rng)).collect();
    let scores: Vec<f64> = encodings
        .par_iter()
        .map(|e| cpx(&minimize_two_level(&multiplier_truth_table(e))) as f64)
        .collect();
    println!("oracle dataset 3000 evals in {:.1}s", start.elapsed().as_secs_f64());

    let dataset: Vec<(Encoding, f64)> =
        encodings[..2500].iter().cloned().zip(scores[..2500].iter().cloned()).collect();
    for (epochs, aug) in [(30, true), (30, false), (60, true)] {
        let tcfg = TrainConfig {
            finetune_epochs: epochs,
            augmentation: aug,
            seed: 5,
            ..Default::default()
        };
        let start = Instant::now();
        let out = finetune(&pretrained, &dataset, &tcfg).unwrap();
        let preds = predict_batch(&out.params, &out.normalizer, &encodings[2500..]);
        let rho = spearman(&preds, &scores[2500..]);
        let best_val = out.curve.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        println!(
            "finetune {epochs}ep aug={aug}: {:.1}s, best val mse {:.4}, holdout spearman {:.4}",
            start.elapsed().as_secs_f64(),
            best_val,
            rho
        );
    }
}
