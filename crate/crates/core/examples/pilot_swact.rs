// SPDX-License-Identifier: Apache-2.0
//! Per-net breakdown of switching activity for SM vs TC.

use encopt_core::design::multiplier_truth_table;
use encopt_core::encoding::Encoding;
use encopt_core::qor::netlist::simulate_swact_detailed;
use encopt_core::qor::{build_netlist, gen_stimuli, minimize_two_level, StimulusConfig};

fn main() {
    let stim = gen_stimuli(&StimulusConfig { n_pairs: 20_000, seed: 0, ..Default::default() });
    for (name, e) in [
        ("tc", Encoding::two_complement()),
        ("sm", Encoding::sign_magnitude()),
    ] {
        let n = build_netlist(&minimize_two_level(&multiplier_truth_table(&e)));
        let (swact, toggles) = simulate_swact_detailed(&n, &e, &stim).unwrap();
        let cycles = (stim.len() - 1) as f64;
        let input_mass: f64 = toggles[..8].iter().map(|t| (t.flips * t.weight) as f64).sum::<f64>() / cycles;
        let total_flips: u64 = toggles.iter().map(|t| t.flips).sum();
        let input_flips: u64 = toggles[..8].iter().map(|t| t.flips).sum();
        println!(
            "{name}: swact={swact:.1} input_weighted={input_mass:.1} ({:.0}%), total_flips/cycle={:.2}, input_flips/cycle={:.3}, nets={}",
            100.0 * input_mass / swact,
            total_flips as f64 / cycles,
            input_flips as f64 / cycles,
            toggles.len()
        );
    }
}
