// SPDX-License-Identifier: Apache-2.0
//! Is CPX of random encodings even correlated with cheap structural features?

use encopt_core::design::multiplier_truth_table;
use encopt_core::encoding::Encoding;
use encopt_core::qor::{cpx, minimize_two_level};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va.sqrt() * vb.sqrt())
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let encodings: Vec<Encoding> = (0..1500).map(|_| Encoding::random(&mut rng)).collect();
    let scores: Vec<f64> = encodings
        .par_iter()
        .map(|e| cpx(&minimize_two_level(&multiplier_truth_table(e))) as f64)
        .collect();

    // Feature 1: total Hamming distance between codes of adjacent values.
    let f1: Vec<f64> = encodings
        .iter()
        .map(|e| {
            (0..15)
                .map(|i| (e.rows()[i] ^ e.rows()[i + 1]).count_ones() as f64)
                .sum()
        })
        .collect();
    // Feature 2: Hamming distance between codes of v and -v (negation pairs).
    let f2: Vec<f64> = encodings
        .iter()
        .map(|e| {
            (1..8)
                .map(|v| {
                    (e.code_for_value(v) ^ e.code_for_value(-v)).count_ones() as f64
                })
                .sum()
        })
        .collect();
    // Feature 3: adjacency of abs-value neighbors |a|,|a|+1 averaged.
    let f3: Vec<f64> = encodings
        .iter()
        .map(|e| {
            (0..7)
                .map(|v| {
                    (e.code_for_value(v) ^ e.code_for_value(v + 1)).count_ones() as f64
                        + (e.code_for_value(-v - 1) ^ e.code_for_value(-v)).count_ones() as f64
                })
                .sum()
        })
        .collect();
    // Feature 4: code of zero's popcount (a zero-row anchor effect).
    let f4: Vec<f64> = encodings
        .iter()
        .map(|e| e.code_for_value(0).count_ones() as f64)
        .collect();
    // Feature 5: doubling structure dist(code(v), code(2v)).
    let f5: Vec<f64> = encodings
        .iter()
        .map(|e| {
            (-4..=3)
                .map(|v: i8| {
                    (e.code_for_value(v) ^ e.code_for_value(v * 2)).count_ones() as f64
                })
                .sum()
        })
        .collect();

    for (name, f) in [("adjacent-dist", &f1), ("negation-dist", &f2), ("abs-chain", &f3), ("zero-pop", &f4), ("doubling", &f5)] {
        println!("pearson(cpx, {name}) = {:+.3}", pearson(&scores, f));
    }
    let std = {
        let n = scores.len() as f64;
        let m = scores.iter().sum::<f64>() / n;
        (scores.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / n).sqrt()
    };
    println!("cpx std {std:.1}");
}
