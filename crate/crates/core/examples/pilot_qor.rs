// SPDX-License-Identifier: Apache-2.0
//! Scratch pilot for oracle timings and reference metric values.

use encopt_core::design::multiplier_truth_table;
use encopt_core::encoding::Encoding;
use encopt_core::qor::{
    build_netlist, cpx, gen_stimuli, minimize_two_level, simulate_swact, transistor_count,
    StimulusConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    for (name, e) in [
        ("tc", Encoding::two_complement()),
        ("sm", Encoding::sign_magnitude()),
    ] {
        let t = multiplier_truth_table(&e);
        let cover = minimize_two_level(&t);
        let n = build_netlist(&cover);
        let stim = gen_stimuli(&StimulusConfig {
            n_pairs: 20_000,
            seed: 0,
            ..Default::default()
        });
        let swact = simulate_swact(&n, &e, &stim).unwrap();
        println!(
            "{name}: cpx={} nt={} depth={} swact={swact:.3}",
            cpx(&cover),
            transistor_count(&n),
            n.depth()
        );
    }

    // Ratio on raw (non-canonical) encodings, 20k stimuli, sigma 3.
    let tc = Encoding::two_complement();
    let sm = Encoding::sign_magnitude();
    let stim = gen_stimuli(&StimulusConfig { n_pairs: 20_000, seed: 0, ..Default::default() });
    let sw = |e: &Encoding| {
        let n = build_netlist(&minimize_two_level(&multiplier_truth_table(e)));
        simulate_swact(&n, e, &stim).unwrap()
    };
    println!("swact ratio SM/TC = {:.4}", sw(&sm) / sw(&tc));

    // Throughput of the exact minimizer on random encodings.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let encodings: Vec<Encoding> = (0..40).map(|_| Encoding::random(&mut rng)).collect();
    let start = Instant::now();
    let mut cpx_values = vec![];
    for e in &encodings {
        cpx_values.push(cpx(&minimize_two_level(&multiplier_truth_table(e))));
    }
    let per = start.elapsed().as_secs_f64() / encodings.len() as f64;
    cpx_values.sort_unstable();
    println!(
        "random multiplier ESPRS eval: {:.1} ms each; cpx range {}..{} median {}",
        per * 1e3,
        cpx_values[0],
        cpx_values.last().unwrap(),
        cpx_values[cpx_values.len() / 2]
    );

    // Full-flow timing.
    let start = Instant::now();
    for e in encodings.iter().take(10) {
        let cover = minimize_two_level(&multiplier_truth_table(e));
        let n = build_netlist(&cover);
        let _ = transistor_count(&n);
        let stim = gen_stimuli(&StimulusConfig { n_pairs: 2_000, seed: 0, ..Default::default() });
        let _ = simulate_swact(&n, e, &stim).unwrap();
    }
    println!(
        "random multiplier FULL eval (2k stimuli): {:.1} ms each",
        start.elapsed().as_secs_f64() / 10.0 * 1e3
    );
}

#[allow(dead_code)]
fn breakdown() {}
