// SPDX-License-Identifier: Apache-2.0
//! Prime-count and phase-timing instrumentation for the exact minimizer.

use encopt_core::design::multiplier_truth_table;
use encopt_core::encoding::Encoding;
use encopt_core::qor::minimize_two_level;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 0..3 {
        let e = Encoding::random(&mut rng);
        let t = multiplier_truth_table(&e);
        for bit in 0..8u32 {
            let on: Vec<u16> = (0..256).filter(|&p| t.output_bit(p, bit) == 1).map(|p| p as u16).collect();
            print!("enc{k} bit{bit}: on={} ", on.len());
            let single = encopt_core::design::TruthTable::new(
                8, 1,
                (0..256).map(|p| t.output_bit(p, bit)).collect(),
            ).unwrap();
            let start = Instant::now();
            let c = minimize_two_level(&single);
            println!("cubes={} t={:.0}ms", c.outputs[0].len(), start.elapsed().as_secs_f64()*1e3);
        }
    }
}
