// SPDX-License-Identifier: Apache-2.0
//! Acceptance suite: one test per release criterion, each printing a PASS or
//! FAIL line with the measured numbers. Heavy training artifacts (pretrained
//! checkpoints, loop runs) are shared between criteria through lazy statics
//! so the suite stays within a small-CPU budget.

use encopt_core::baselines::{binary_switching_search, random_search, BsaConfig, OracleEval};
use encopt_core::design::multiplier_truth_table;
use encopt_core::encoding::{AugmentationElement, Encoding, SoftTensor};
use encopt_core::orchestrator::{
    run_loop, DatasetStore, DesignChoice, LoopConfig, LoopReport, RecommenderKind, TargetMetric,
};
use encopt_core::qor::{
    build_netlist, evaluate, gen_stimuli, minimize_two_level, simulate_swact, DesignKind, Flow,
    StimulusConfig,
};
use encopt_core::recommender::{legalize, InversionConfig};
use encopt_core::surrogate::{
    backward_regression, forward_regression, inputs_from_soft, train::ssl_accuracy, ModelConfig,
    SurrogateParams, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::OnceLock;
use std::time::Instant;

const SEEDS: [u64; 3] = [101, 202, 303];

fn verdict(criterion: u32, pass: bool, detail: &str) {
    println!("[criterion {criterion:2}] {}: {detail}", if pass { "PASS" } else { "FAIL" });
}

// ---------------------------------------------------------------------------
// Shared fixtures

/// Desk-scale loop configuration shared by the loop-based criteria.
fn desk_loop_cfg(seed: u64) -> LoopConfig {
    LoopConfig {
        initial_size: 1000,
        per_round: 200,
        rounds: 5,
        seed,
        train: TrainConfig {
            ssl_epochs: 200,
            ssl_samples_per_epoch: 256,
            finetune_epochs: 40,
            batch_size: 256,
            finetune_lr: 1e-3,
            seed,
            ..Default::default()
        },
        inversion: InversionConfig {
            epochs: 120,
            ramp_epochs: 40,
            keep_fraction: 0.25,
            seed,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// The three desk-scale inversion loop runs backing criteria 7 and 8.
fn desk_loops() -> &'static Vec<(DatasetStore, LoopReport)> {
    static RUNS: OnceLock<Vec<(DatasetStore, LoopReport)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&seed| run_loop(&desk_loop_cfg(seed)).expect("desk loop runs"))
            .collect()
    })
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_legality_fuzz() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0_22);
    let mut legal = 0usize;
    let total = 10_000usize;
    for _ in 0..total {
        let vals: Vec<f64> = (0..64).map(|_| rng.gen_range(-0.5..1.5)).collect();
        let e = legalize(&SoftTensor::new(vals).expect("finite"));
        let grid: Vec<Vec<u8>> = e.to_grid().iter().map(|r| r.to_vec()).collect();
        if encopt_core::encoding::is_legal(&grid) == Ok(true) {
            legal += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = legal == total && secs < 30.0;
    verdict(1, pass, &format!("legalize fuzz {legal}/{total} legal in {secs:.1}s (limit 30s)"));
    assert!(pass);
}

#[test]
fn criterion_02_cpx_augmentation_invariance() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA06);
    let encodings: Vec<Encoding> = (0..100).map(|_| Encoding::random(&mut rng)).collect();
    let group = AugmentationElement::all();
    let cfg = StimulusConfig::default();
    let mismatches: usize = encodings
        .par_iter()
        .map(|e| {
            let base = evaluate(e, &DesignKind::Multiplier, Flow::Esprs, &cfg, 0).unwrap().cpx;
            group
                .iter()
                .filter(|g| {
                    let image = g.apply(e);
                    let c =
                        evaluate(&image, &DesignKind::Multiplier, Flow::Esprs, &cfg, 0).unwrap().cpx;
                    c != base
                })
                .count()
        })
        .sum();
    let secs = start.elapsed().as_secs_f64();
    let pass = mismatches == 0 && secs < 600.0;
    verdict(
        2,
        pass,
        &format!("100 encodings x 48 orbit members, {mismatches} CPX mismatches in {secs:.0}s (limit 600s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_netlist_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x03AC);
    let failures: usize = (0..50)
        .map(|_| Encoding::random(&mut rng))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|e| {
            let table = multiplier_truth_table(e);
            let netlist = build_netlist(&minimize_two_level(&table));
            (0..256usize)
                .filter(|&p| netlist.eval(p as u16) != table.output(p))
                .count()
        })
        .sum();
    let pass = failures == 0;
    verdict(3, pass, &format!("50 random encodings x 256 patterns, {failures} mismatches"));
    assert!(pass);
}

#[test]
fn criterion_04_gradient_correctness() {
    const TOL: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(0x04AD);
    let mut params = SurrogateParams::init(ModelConfig::default(), 1404);
    for v in params.data_mut() {
        *v += rng.gen_range(-0.01..0.01);
    }
    let xs: Vec<SoftTensor> = (0..2)
        .map(|_| SoftTensor::new((0..64).map(|_| rng.gen_range(0.05..0.95)).collect()).unwrap())
        .collect();
    let w = [1.0, -0.6];
    let loss = |p: &SurrogateParams, xs: &[SoftTensor]| -> f64 {
        let (y, _) = forward_regression(p, inputs_from_soft(xs));
        y.iter().zip(w.iter()).map(|(a, b)| a * b).sum()
    };
    let (_, cache) = forward_regression(&params, inputs_from_soft(&xs));
    let grads = backward_regression(&params, &cache, &w, true, true);
    let analytic = grads.params.unwrap();
    let dinput = &grads.inputs.unwrap()[0];

    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-5);
    // Central difference; a ReLU kink inside the probe window invalidates the
    // coarse estimate, in which case the tighter window is authoritative.
    let central = |f: &mut dyn FnMut(f64) -> f64| -> f64 {
        let coarse = (f(1e-4) - f(-1e-4)) / 2e-4;
        let fine = (f(1e-5) - f(-1e-5)) / 2e-5;
        if rel(coarse, fine) > TOL / 2.0 {
            fine
        } else {
            coarse
        }
    };

    // One segment per layer type, 100 coordinates each.
    let layout = params.layout();
    let layer_types = [
        "rowenc.w1",
        "cls",
        "pos",
        "layer0.ln1.gamma",
        "layer0.attn.wq",
        "layer0.attn.wo",
        "layer0.ffn.w1",
        "head.w1",
    ];
    let mut worst_overall = (0.0f64, String::new());
    for name in layer_types {
        let seg = layout.find(name);
        let len = seg.rows * seg.cols;
        let mut worst = 0.0f64;
        for k in 0..100 {
            let idx = seg.offset + (k * 7919) % len;
            let numeric = central(&mut |h| {
                let mut p = params.clone();
                p.data_mut()[idx] += h;
                loss(&p, &xs)
            });
            worst = worst.max(rel(analytic[idx], numeric));
        }
        if worst > worst_overall.0 {
            worst_overall = (worst, name.to_string());
        }
    }
    // Inputs: 100 coordinate probes across the two samples.
    let mut worst_input = 0.0f64;
    for k in 0..100 {
        let sample = k % 2;
        let idx = (k * 13) % 64;
        let numeric = central(&mut |h| {
            let mut batch = xs.clone();
            let mut v = batch[sample].values().to_vec();
            v[idx] += h;
            batch[sample] = SoftTensor::new(v).unwrap();
            loss(&params, &batch)
        });
        let a = grads_input(&params, &xs, &w, sample)[idx];
        worst_input = worst_input.max(rel(a, numeric));
    }
    let _ = dinput;
    let pass = worst_overall.0 < TOL && worst_input < TOL;
    verdict(
        4,
        pass,
        &format!(
            "worst param rel err {:.2e} ({}), worst input rel err {worst_input:.2e} (tol 1e-4)",
            worst_overall.0, worst_overall.1
        ),
    );
    assert!(pass);
}

fn grads_input(p: &SurrogateParams, xs: &[SoftTensor], w: &[f64], sample: usize) -> Vec<f64> {
    let (_, cache) = forward_regression(p, inputs_from_soft(xs));
    let grads = backward_regression(p, &cache, w, false, true);
    grads.inputs.unwrap().swap_remove(sample)
}

#[test]
fn criterion_05_sm_vs_tc_switching_direction() {
    let start = Instant::now();
    let stim = gen_stimuli(&StimulusConfig { n_pairs: 20_000, sigma: 3.0, seed: 0, ..Default::default() });
    let swact = |e: &Encoding| {
        let n = build_netlist(&minimize_two_level(&multiplier_truth_table(e)));
        simulate_swact(&n, e, &stim).unwrap()
    };
    let tc = swact(&Encoding::two_complement());
    let sm = swact(&Encoding::sign_magnitude());
    let ratio = sm / tc;
    let secs = start.elapsed().as_secs_f64();
    let pass = ratio < 0.95 && secs < 60.0;
    verdict(
        5,
        pass,
        &format!(
            "SwAct(SM)/SwAct(TC) = {ratio:.3} (required < 0.95) in {secs:.1}s; \
             two-level covers realize the sign-magnitude multiplier ~40% larger \
             (CPX 169 vs 117), so its extra internal toggling outweighs the \
             quieter inputs; multi-level synthesis, which this oracle \
             deliberately omits, is what recovers the expected direction"
        ),
    );
    assert!(pass, "known oracle-level divergence: ratio {ratio:.3} >= 0.95");
}

#[test]
fn criterion_10_metric_correlations() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10C0);
    let encodings: Vec<Encoding> = (0..300).map(|_| Encoding::random(&mut rng)).collect();
    let cfg = StimulusConfig { n_pairs: 8_000, seed: 7, ..Default::default() };
    let records: Vec<_> = encodings
        .par_iter()
        .map(|e| evaluate(e, &DesignKind::Multiplier, Flow::Full, &cfg, 0).unwrap())
        .collect();
    let cpx: Vec<f64> = records.iter().map(|r| r.cpx as f64).collect();
    let nt: Vec<f64> = records.iter().map(|r| r.nt.unwrap() as f64).collect();
    let swact: Vec<f64> = records.iter().map(|r| r.swact.unwrap()).collect();
    let rho_nt = spearman(&cpx, &nt);
    let rho_swact = spearman(&cpx, &swact);
    let pass = rho_nt > 0.6 && rho_swact > 0.4;
    verdict(
        10,
        pass,
        &format!("spearman(CPX,NT) = {rho_nt:.3} (> 0.6), spearman(CPX,SwAct) = {rho_swact:.3} (> 0.4)"),
    );
    assert!(pass);
}

#[test]
fn criterion_12_end_to_end_determinism() {
    let cfg = LoopConfig {
        initial_size: 60,
        per_round: 15,
        rounds: 2,
        seed: 1212,
        train: TrainConfig {
            ssl_epochs: 3,
            ssl_samples_per_epoch: 64,
            finetune_epochs: 3,
            batch_size: 32,
            seed: 1212,
            ..Default::default()
        },
        inversion: InversionConfig {
            epochs: 20,
            ramp_epochs: 8,
            keep_fraction: 0.5,
            seed: 1212,
            ..Default::default()
        },
        ..Default::default()
    };
    let (store_a, _) = run_loop(&cfg).unwrap();
    let (store_b, _) = run_loop(&cfg).unwrap();
    let identical = store_a.journal_bytes() == store_b.journal_bytes();
    verdict(
        12,
        identical,
        &format!(
            "two identical-seed loop runs: journals {} ({} bytes)",
            if identical { "byte-identical" } else { "differ" },
            store_a.journal_bytes().len()
        ),
    );
    assert!(identical);
}

// ---------------------------------------------------------------------------

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

// ---------------------------------------------------------------------------
// Trained-fixture criteria

#[test]
fn criterion_06_ssl_pretraining_accuracy() {
    let cfg = desk_loop_cfg(SEEDS[0]);
    let params = pretrained_cached(&cfg);
    let acc = ssl_accuracy(params, 512, 0x06AC);
    let pass = acc > 0.9;
    verdict(
        6,
        pass,
        &format!("held-out permutation accuracy {acc:.4} after {} epochs (required > 0.9, chance 1/16)", cfg.train.ssl_epochs),
    );
    assert!(pass);
}

/// Pretrained checkpoints are pure functions of (seed, ssl config); criteria
/// share them to keep the suite inside the CPU budget.
fn pretrained_cached(cfg: &LoopConfig) -> &'static SurrogateParams {
    static CACHE: OnceLock<std::sync::Mutex<std::collections::HashMap<u64, &'static SurrogateParams>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut map = cache.lock().unwrap();
    map.entry(cfg.seed)
        .or_insert_with(|| {
            Box::leak(Box::new(encopt_core::orchestrator::runner::pretrained_params(cfg)))
        })
}

fn running_min_at(store: &DatasetStore, target: TargetMetric, budget: usize) -> f64 {
    store
        .records()
        .iter()
        .take(budget)
        .filter_map(|r| r.metric(target))
        .fold(f64::INFINITY, f64::min)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn criterion_07_loop_efficacy() {
    let start = Instant::now();
    let runs = desk_loops();
    let mut initial_mins = Vec::new();
    let mut final_mins = Vec::new();
    let mut detail = String::new();
    for (seed, (_, report)) in SEEDS.iter().zip(runs) {
        let initial = report.rounds[0].min;
        let fin = report.rounds.last().unwrap().best_so_far;
        detail.push_str(&format!("seed {seed}: {initial} -> {fin}; "));
        initial_mins.push(initial);
        final_mins.push(fin);
    }
    let med_initial = median(initial_mins);
    let med_final = median(final_mins);
    let secs = start.elapsed().as_secs_f64();
    let pass = med_final < med_initial && secs < 7200.0;
    verdict(
        7,
        pass,
        &format!(
            "median final running-min CPX {med_final} vs median initial min {med_initial} \
             over 3 seeds ({detail}{secs:.0}s, limit 7200s)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_inversion_vs_naive() {
    // The inversion arms are the first two rounds of the criterion-7 runs
    // (identical config prefix); the naive arms run separately on matched
    // evaluation budgets.
    let ni_runs = desk_loops();
    let mut ni_wins = 0;
    let mut detail = String::new();
    for (i, &seed) in SEEDS.iter().enumerate() {
        let naive_cfg = LoopConfig {
            recommender: RecommenderKind::Naive,
            naive_pool: 50_000,
            rounds: 2,
            ..desk_loop_cfg(seed)
        };
        let (naive_store, _) = run_loop(&naive_cfg).expect("naive loop runs");
        let budget = naive_store.len();
        let ni_min = running_min_at(&ni_runs[i].0, TargetMetric::Cpx, budget);
        let naive_min = running_min_at(&naive_store, TargetMetric::Cpx, budget);
        if ni_min <= naive_min {
            ni_wins += 1;
        }
        detail.push_str(&format!("seed {seed}: NI {ni_min} vs NA {naive_min}; "));
    }
    let pass = ni_wins >= 2;
    verdict(8, pass, &format!("NI <= NA at round 2 in {ni_wins}/3 seeds ({detail})"));
    assert!(pass);
}

#[test]
fn criterion_09_sample_efficiency_vs_baselines() {
    let budget = 5000usize;
    let eval = OracleEval {
        kind: DesignKind::Multiplier,
        flow: Flow::Esprs,
        stimulus: StimulusConfig::default(),
        target: TargetMetric::Cpx,
    };
    let mut loop_mins = Vec::new();
    let mut rs_mins = Vec::new();
    let mut bsa_mins = Vec::new();
    let mut detail = String::new();
    for &seed in &SEEDS {
        let cfg = LoopConfig {
            per_round: 1000,
            rounds: 4,
            inversion: InversionConfig {
                epochs: 100,
                ramp_epochs: 35,
                keep_fraction: 0.5,
                seed,
                ..desk_loop_cfg(seed).inversion
            },
            ..desk_loop_cfg(seed)
        };
        let (store, _) = run_loop(&cfg).expect("budget loop runs");
        let genial = running_min_at(&store, TargetMetric::Cpx, budget);
        let rs = random_search(budget, &eval, seed ^ 0x95).final_min();
        let bsa =
            binary_switching_search(budget, &eval, seed ^ 0xB5A, &BsaConfig::default()).final_min();
        detail.push_str(&format!("seed {seed}: loop {genial} rs {rs} bsa {bsa}; "));
        loop_mins.push(genial);
        rs_mins.push(rs);
        bsa_mins.push(bsa);
    }
    let (ml, mr, mb) = (median(loop_mins), median(rs_mins), median(bsa_mins));
    let pass = ml <= mr && ml <= mb;
    verdict(
        9,
        pass,
        &format!("median min CPX at 5k evals: loop {ml}, random {mr}, bsa {mb} ({detail})"),
    );
    assert!(pass);
}

#[test]
fn criterion_11_fsm_generalization() {
    let mut final_vs_initial = Vec::new();
    let mut detail = String::new();
    for &seed in &SEEDS {
        let cfg = LoopConfig {
            design: DesignChoice::Fsm { spec_seed: 77 },
            flow: Flow::Full,
            target: TargetMetric::Nt,
            rounds: 3,
            ..desk_loop_cfg(seed)
        };
        let (_, report) = run_loop(&cfg).expect("fsm loop runs");
        let initial = report.rounds[0].min;
        let fin = report.rounds.last().unwrap().best_so_far;
        detail.push_str(&format!("seed {seed}: NT {initial} -> {fin}; "));
        final_vs_initial.push((initial, fin));
    }
    let med_initial = median(final_vs_initial.iter().map(|p| p.0).collect());
    let med_final = median(final_vs_initial.iter().map(|p| p.1).collect());
    let pass = med_final < med_initial;
    verdict(
        11,
        pass,
        &format!("FSM loop median final min NT {med_final} vs initial {med_initial} ({detail})"),
    );
    assert!(pass);
}
