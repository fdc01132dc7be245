// SPDX-License-Identifier: Apache-2.0
//! The generation loop: seed an initial dataset, then per round finetune the
//! surrogate on everything evaluated so far, recommend new designs, evaluate
//! them and append.

use super::config::{subseed, DesignChoice, LoopConfig, RecommenderKind};
use super::store::DatasetStore;
use crate::design::random_fsm_spec;
use crate::encoding::{canonical_form, Encoding};
use crate::qor::{evaluate, DesignKind, QorError, QorRecord};
use crate::recommender::{recommend_inversion, recommend_naive, InversionConfig, Recommendation};
use crate::surrogate::{
    finetune, pretrain_ssl, ModelConfig, ScoreNormalizer, SurrogateParams, TrainConfig, TrainError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoopError {
    #[error("config error: {0}")]
    Config(String),
    #[error("training failed in round {round}: {source}")]
    Train { round: u32, source: TrainError },
    #[error("evaluation failed in round {round}: {source}")]
    Eval { round: u32, source: QorError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundStats {
    pub round: u32,
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    /// Best encoding seen so far (running, not per-round).
    pub best_so_far: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopReport {
    pub rounds: Vec<RoundStats>,
    pub best_encoding: Encoding,
    pub best_metric: f64,
    pub store_hash: u64,
    pub evaluations: usize,
}

pub fn design_kind(choice: &DesignChoice) -> DesignKind {
    match choice {
        DesignChoice::Multiplier => DesignKind::Multiplier,
        DesignChoice::Fsm { spec_seed } => {
            DesignKind::Fsm(random_fsm_spec(&mut ChaCha8Rng::seed_from_u64(*spec_seed)))
        }
    }
}

/// Evaluates a batch in parallel, preserving order.
fn eval_batch(
    encodings: &[Encoding],
    kind: &DesignKind,
    cfg: &LoopConfig,
    round: u32,
) -> Result<Vec<QorRecord>, QorError> {
    encodings
        .par_iter()
        .map(|e| evaluate(e, kind, cfg.flow, &cfg.stimulus, round))
        .collect()
}

/// Draws uniform random encodings whose orbits are new to both the store and
/// the `taken` set, until `n` are found.
fn fresh_random(
    n: usize,
    rng: &mut ChaCha8Rng,
    store: &DatasetStore,
    taken: &mut std::collections::HashSet<u64>,
) -> Vec<Encoding> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let canon = canonical_form(&Encoding::random(rng));
        let key = canon.packed();
        if store.contains(&canon) || !taken.insert(key) {
            continue;
        }
        out.push(canon);
    }
    out
}

/// Builds the initial dataset: uniform legal encodings, orbit-deduped, with
/// the two's-complement and sign-magnitude orbits excluded, all evaluated.
pub fn seed_dataset(cfg: &LoopConfig) -> Result<DatasetStore, LoopError> {
    cfg.validate().map_err(LoopError::Config)?;
    let kind = design_kind(&cfg.design);
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "init", 0));
    let tc_key = canonical_form(&Encoding::two_complement()).packed();
    let sm_key = canonical_form(&Encoding::sign_magnitude()).packed();

    let mut keys = std::collections::HashSet::new();
    let mut picks = Vec::with_capacity(cfg.initial_size);
    for _ in 0..cfg.initial_size {
        let canon = canonical_form(&Encoding::random(&mut rng));
        let key = canon.packed();
        if key == tc_key || key == sm_key || !keys.insert(key) {
            continue; // dedup may shrink the initial set
        }
        picks.push(canon);
    }
    let records = eval_batch(&picks, &kind, cfg, 0)
        .map_err(|source| LoopError::Eval { round: 0, source })?;
    let mut store = DatasetStore::new();
    for r in records {
        store.insert(r);
    }
    Ok(store)
}

struct TrainedModel {
    params: SurrogateParams,
    normalizer: ScoreNormalizer,
}

fn finetune_round(
    base: &SurrogateParams,
    store: &DatasetStore,
    cfg: &LoopConfig,
    round: u32,
) -> Result<TrainedModel, TrainError> {
    let dataset = store.dataset(cfg.target);
    let train_cfg =
        TrainConfig { seed: subseed(cfg.seed, "finetune", round as u64), ..cfg.train.clone() };
    let out = finetune(base, &dataset, &train_cfg)?;
    Ok(TrainedModel { params: out.params, normalizer: out.normalizer })
}

fn recommend_round(
    model: &TrainedModel,
    cfg: &LoopConfig,
    round: u32,
) -> Recommendation {
    match cfg.recommender {
        RecommenderKind::Inversion => {
            let inv_cfg = InversionConfig {
                seed: subseed(cfg.seed, "invert", round as u64),
                ..cfg.inversion.clone()
            };
            recommend_inversion(&model.params, &model.normalizer, cfg.per_round, &inv_cfg)
        }
        RecommenderKind::Naive => {
            let mut rng =
                ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "naive-pool", round as u64));
            recommend_naive(
                &model.params,
                &model.normalizer,
                cfg.naive_pool,
                cfg.per_round,
                &mut rng,
            )
        }
    }
}

/// The pretraining stage shared by the loop and the ablations.
pub fn pretrained_params(cfg: &LoopConfig) -> SurrogateParams {
    let init = SurrogateParams::init(ModelConfig::default(), subseed(cfg.seed, "model", 0));
    if !cfg.ssl {
        return init;
    }
    let train_cfg = TrainConfig { seed: subseed(cfg.seed, "ssl", 0), ..cfg.train.clone() };
    pretrain_ssl(&init, &train_cfg).0
}

/// Runs the full loop. Returns the final store and the per-round report; on a
/// mid-round failure the error is journaled in the store and returned, with
/// all previously completed rounds still valid.
pub fn run_loop(cfg: &LoopConfig) -> Result<(DatasetStore, LoopReport), (DatasetStore, LoopError)> {
    let mut store = match seed_dataset(cfg) {
        Ok(s) => s,
        Err(e) => return Err((DatasetStore::new(), e)),
    };
    let report = run_rounds(cfg, &mut store, None);
    match report {
        Ok(report) => Ok((store, report)),
        Err(e) => Err((store, e)),
    }
}

/// Runs the generation rounds on an existing store (round numbering continues
/// from `store`'s highest round). `pretrained` overrides the SSL stage when
/// supplied, which the ablations use to share checkpoints across arms.
pub fn run_rounds(
    cfg: &LoopConfig,
    store: &mut DatasetStore,
    pretrained: Option<&SurrogateParams>,
) -> Result<LoopReport, LoopError> {
    cfg.validate().map_err(LoopError::Config)?;
    let kind = design_kind(&cfg.design);
    let base = match pretrained {
        Some(p) => p.clone(),
        None => pretrained_params(cfg),
    };

    let mut rounds = Vec::with_capacity(cfg.rounds + 1);
    let push_stats = |store: &DatasetStore, rounds: &mut Vec<RoundStats>, round: u32| {
        if let Some((min, mean, count)) = store.round_stats(round, cfg.target) {
            let best_so_far = store
                .best(cfg.target)
                .and_then(|r| r.metric(cfg.target))
                .unwrap_or(f64::INFINITY);
            rounds.push(RoundStats { round, count, min, mean, best_so_far });
        }
    };
    push_stats(store, &mut rounds, 0);

    for round in 1..=cfg.rounds as u32 {
        let model = match finetune_round(&base, store, cfg, round) {
            Ok(m) => m,
            Err(source) => {
                store.record_error(round, source.to_string());
                return Err(LoopError::Train { round, source });
            }
        };
        let rec = recommend_round(&model, cfg, round);

        // Keep orbit-new candidates, then top up with fresh random designs so
        // the per-round evaluation budget is always spent.
        let mut taken = std::collections::HashSet::new();
        let mut batch: Vec<Encoding> = Vec::with_capacity(cfg.per_round);
        for e in &rec.encodings {
            if !store.contains(e) && taken.insert(e.packed()) {
                batch.push(*e);
            }
        }
        batch.truncate(cfg.per_round);
        if batch.len() < cfg.per_round {
            let mut rng =
                ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "fill", round as u64));
            let fill = fresh_random(cfg.per_round - batch.len(), &mut rng, store, &mut taken);
            batch.extend(fill);
        }

        let records = match eval_batch(&batch, &kind, cfg, round) {
            Ok(r) => r,
            Err(source) => {
                store.record_error(round, source.to_string());
                return Err(LoopError::Eval { round, source });
            }
        };
        for r in records {
            store.insert(r);
        }
        push_stats(store, &mut rounds, round);
    }

    let best = store.best(cfg.target).expect("nonempty store");
    let report = LoopReport {
        best_encoding: best.encoding,
        best_metric: best.metric(cfg.target).unwrap(),
        store_hash: store.hash(),
        evaluations: store.len(),
        rounds,
    };
    Ok(report)
}
