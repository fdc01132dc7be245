// SPDX-License-Identifier: Apache-2.0
//! Per-stage timing of the batched forward/backward path.

use encopt_core::surrogate::math::{gemm_nn, gemm_nt, gemm_tn, layer_norm, Mat};
use std::time::Instant;

fn time<F: FnMut()>(label: &str, reps: usize, mut f: F) {
    let start = Instant::now();
    for _ in 0..reps {
        f();
    }
    println!("{label}: {:.2} ms/rep", start.elapsed().as_secs_f64() * 1e3 / reps as f64);
}

fn main() {
    let b = 256;
    let rows = b * 17;
    let x = Mat::from_vec(rows, 64, (0..rows * 64).map(|i| (i % 7) as f64 * 0.1).collect());
    let w = Mat::from_vec(64, 64, (0..64 * 64).map(|i| (i % 5) as f64 * 0.01).collect());
    let wf = Mat::from_vec(128, 64, (0..128 * 64).map(|i| (i % 5) as f64 * 0.01).collect());
    let gamma = vec![1.0; 64];
    let beta = vec![0.0; 64];

    time("gemm_nt 4352x64 * (64x64)^T", 50, || {
        let _ = gemm_nt(&x, &w);
    });
    time("gemm_nn 4352x64 * 64x64", 50, || {
        let c = Mat::from_vec(64, 64, w.data.clone());
        let _ = gemm_nn(&x, &c);
    });
    time("gemm_tn (4352x64)^T * 4352x64", 50, || {
        let _ = gemm_tn(&x, &x);
    });
    time("gemm_nt ffn 4352x64 * (128x64)^T", 50, || {
        let _ = gemm_nt(&x, &wf);
    });
    time("layer_norm 4352x64", 50, || {
        let _ = layer_norm(&x, &gamma, &beta);
    });
    time("alloc+zero 4352x64", 50, || {
        let m = Mat::zeros(rows, 64);
        std::hint::black_box(&m);
    });

    // Attention-equivalent loop cost (scores + ctx for 256 samples, 4 heads).
    let q = x.clone();
    let k = x.clone();
    let v = x.clone();
    time("attention-like loops", 10, || {
        let mut acc = 0.0;
        for bb in 0..b {
            for h in 0..4 {
                let hs = h * 16..(h + 1) * 16;
                let mut scores = [0.0f64; 17 * 17];
                for t in 0..17 {
                    let qr = &q.row(bb * 17 + t)[hs.clone()];
                    for u in 0..17 {
                        let kr = &k.row(bb * 17 + u)[hs.clone()];
                        scores[t * 17 + u] = qr.iter().zip(kr).map(|(a, c)| a * c).sum();
                    }
                }
                for t in 0..17 {
                    for u in 0..17 {
                        let vv = &v.row(bb * 17 + u)[hs.clone()];
                        acc += scores[t * 17 + u] * vv[0];
                    }
                }
            }
        }
        std::hint::black_box(acc);
    });
}
