// SPDX-License-Identifier: Apache-2.0
//! Loop configuration and seed derivation.

use crate::qor::{Flow, StimulusConfig};
use crate::recommender::InversionConfig;
use crate::surrogate::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Which evaluated metric drives the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMetric {
    Cpx,
    Nt,
    Swact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecommenderKind {
    /// Gradient inversion of the surrogate.
    Inversion,
    /// Random pool scored by the surrogate, best predicted kept.
    Naive,
}

/// Design family under optimization. FSM specs are carried by seed so a
/// config file stays a complete description of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DesignChoice {
    Multiplier,
    Fsm { spec_seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub design: DesignChoice,
    pub flow: Flow,
    pub target: TargetMetric,
    /// Random designs evaluated before the first round.
    pub initial_size: usize,
    /// Designs recommended (and evaluated) per generation round.
    pub per_round: usize,
    pub rounds: usize,
    pub recommender: RecommenderKind,
    /// Pool size scored by the naive recommender per round.
    pub naive_pool: usize,
    /// Self-supervised pretraining before the first finetune.
    pub ssl: bool,
    /// Round-1 finetune epoch override. Feature discovery on the initial
    /// dataset needs a long schedule; later rounds warm-start from the
    /// previous checkpoint and get by with `train.finetune_epochs`.
    pub first_round_finetune_epochs: Option<usize>,
    pub train: TrainConfig,
    pub inversion: InversionConfig,
    pub stimulus: StimulusConfig,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for LoopConfig {
    /// Desk-scale defaults: a tenth of the reference experiment sizes, with
    /// training budgets sized for a small CPU run.
    fn default() -> Self {
        Self {
            design: DesignChoice::Multiplier,
            flow: Flow::Esprs,
            target: TargetMetric::Cpx,
            initial_size: 1000,
            per_round: 200,
            rounds: 5,
            recommender: RecommenderKind::Inversion,
            naive_pool: 50_000,
            ssl: true,
            train: TrainConfig { finetune_epochs: 60, ..Default::default() },
            inversion: InversionConfig {
                epochs: 200,
                ramp_epochs: 70,
                keep_fraction: 0.25,
                ..Default::default()
            },
            stimulus: StimulusConfig::default(),
            seed: 0,
            out_dir: None,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.rounds == 0 {
            return Err("rounds must be at least 1".into());
        }
        if self.initial_size == 0 || self.per_round == 0 {
            return Err("initial size and designs per round must be at least 1".into());
        }
        if self.target != TargetMetric::Cpx && self.flow != Flow::Full {
            return Err(format!("target {:?} requires the full flow", self.target));
        }
        if self.target == TargetMetric::Swact && !matches!(self.design, DesignChoice::Multiplier) {
            return Err("switching activity is only defined for multiplier designs".into());
        }
        self.stimulus.validate()?;
        self.inversion.validate()?;
        self.train.validate().map_err(|e| e.to_string())?;
        Ok(())
    }
}

/// Deterministic sub-seed derivation: one master seed fans out to every
/// random consumer, keyed by purpose tag and round.
pub fn subseed(master: u64, tag: &str, round: u64) -> u64 {
    let mut h = 0xcbf29ce484222325u64; // FNV-1a
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut z = master ^ h ^ round.wrapping_mul(0x9e3779b97f4a7c15);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
