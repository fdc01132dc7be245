// SPDX-License-Identifier: Apache-2.0
//! Wider timing sweep of the exact oracle over random encodings.

use encopt_core::design::multiplier_truth_table;
use encopt_core::encoding::Encoding;
use encopt_core::qor::{cpx, minimize_two_level};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let mut times = vec![];
    let mut cpxs = vec![];
    for _ in 0..200 {
        let e = Encoding::random(&mut rng);
        let t = multiplier_truth_table(&e);
        let start = Instant::now();
        let c = minimize_two_level(&t);
        times.push(start.elapsed().as_secs_f64() * 1e3);
        cpxs.push(cpx(&c));
    }
    times.sort_by(f64::total_cmp);
    cpxs.sort_unstable();
    println!(
        "per-encoding minimize ms: median={:.1} p90={:.1} max={:.1} total={:.1}s",
        times[100],
        times[180],
        times[199],
        times.iter().sum::<f64>() / 1e3
    );
    println!(
        "cpx: min={} median={} max={}",
        cpxs[0], cpxs[100], cpxs[199]
    );
}
