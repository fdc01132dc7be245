// SPDX-License-Identifier: Apache-2.0
//! Correlation stability versus stimulus count.

use encopt_core::encoding::Encoding;
use encopt_core::qor::{evaluate, DesignKind, Flow, StimulusConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

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
    for (seed, n_pairs) in [(0x10C0u64, 2000usize), (0x10C0, 8000), (777, 8000), (42, 8000)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encodings: Vec<Encoding> = (0..300).map(|_| Encoding::random(&mut rng)).collect();
        let cfg = StimulusConfig { n_pairs, seed: 7, ..Default::default() };
        let recs: Vec<_> = encodings
            .par_iter()
            .map(|e| evaluate(e, &DesignKind::Multiplier, Flow::Full, &cfg, 0).unwrap())
            .collect();
        let cpx: Vec<f64> = recs.iter().map(|r| r.cpx as f64).collect();
        let nt: Vec<f64> = recs.iter().map(|r| r.nt.unwrap() as f64).collect();
        let sw: Vec<f64> = recs.iter().map(|r| r.swact.unwrap()).collect();
        println!(
            "seed {seed:#x} pairs {n_pairs}: rho(cpx,nt)={:.3} rho(cpx,swact)={:.3} rho(nt,swact)={:.3}",
            spearman(&cpx, &nt),
            spearman(&cpx, &sw),
            spearman(&nt, &sw)
        );
    }
}
