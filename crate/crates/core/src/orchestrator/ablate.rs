// SPDX-License-Identifier: Apache-2.0
//! Controlled ablation experiments: pretraining-epoch sweep and data
//! augmentation on/off, both over shared seeds and shared initial datasets.

use super::config::{subseed, LoopConfig};
use super::runner::{run_rounds, seed_dataset, LoopError, LoopReport};
use crate::surrogate::{pretrain_ssl, ModelConfig, SurrogateParams, TrainConfig};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    SslEpochsSweep,
    AugmentationOnOff,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationArm {
    pub label: String,
    pub seed: u64,
    pub initial_hash: u64,
    pub report: LoopReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationReport {
    pub mode: AblationMode,
    pub arms: Vec<AblationArm>,
}

/// Pretraining sweep: one generation round from model checkpoints taken at
/// the given pretraining epochs, on a shared per-seed dataset.
pub fn ssl_epochs_sweep(
    cfg: &LoopConfig,
    checkpoints: &[usize],
    seeds: &[u64],
) -> Result<AblationReport, LoopError> {
    let mut arms = Vec::new();
    for &seed in seeds {
        let arm_cfg = LoopConfig { seed, rounds: 1, ..cfg.clone() };
        let shared_store = seed_dataset(&arm_cfg)?;
        let init = SurrogateParams::init(ModelConfig::default(), subseed(seed, "model", 0));
        for &epochs in checkpoints {
            let params = if epochs == 0 {
                init.clone()
            } else {
                let train_cfg = TrainConfig {
                    ssl_epochs: epochs,
                    seed: subseed(seed, "ssl", 0),
                    ..arm_cfg.train.clone()
                };
                pretrain_ssl(&init, &train_cfg).0
            };
            let mut store = shared_store.clone();
            let report = run_rounds(&arm_cfg, &mut store, Some(&params))?;
            arms.push(AblationArm {
                label: format!("ssl_epochs={epochs}"),
                seed,
                initial_hash: shared_store.hash(),
                report,
            });
        }
    }
    Ok(AblationReport { mode: AblationMode::SslEpochsSweep, arms })
}

/// Augmentation on/off: both arms share the initial dataset and the
/// pretrained checkpoint; only the finetuning augmentation flag differs.
pub fn augmentation_on_off(cfg: &LoopConfig, seeds: &[u64]) -> Result<AblationReport, LoopError> {
    let mut arms = Vec::new();
    for &seed in seeds {
        let base_cfg = LoopConfig { seed, ..cfg.clone() };
        let shared_store = seed_dataset(&base_cfg)?;
        let init = SurrogateParams::init(ModelConfig::default(), subseed(seed, "model", 0));
        let pretrained = if base_cfg.ssl {
            let train_cfg =
                TrainConfig { seed: subseed(seed, "ssl", 0), ..base_cfg.train.clone() };
            pretrain_ssl(&init, &train_cfg).0
        } else {
            init
        };
        for augmentation in [true, false] {
            let arm_cfg = LoopConfig {
                train: TrainConfig { augmentation, ..base_cfg.train.clone() },
                ..base_cfg.clone()
            };
            let mut store = shared_store.clone();
            let report = run_rounds(&arm_cfg, &mut store, Some(&pretrained))?;
            arms.push(AblationArm {
                label: format!("augmentation={augmentation}"),
                seed,
                initial_hash: shared_store.hash(),
                report,
            });
        }
    }
    Ok(AblationReport { mode: AblationMode::AugmentationOnOff, arms })
}

/// CSV form: one row per (arm, round).
pub fn ablation_csv(report: &AblationReport) -> String {
    let mut csv = String::from("label,seed,initial_hash,round,count,min,mean,best_so_far\n");
    for arm in &report.arms {
        for r in &arm.report.rounds {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                arm.label, arm.seed, arm.initial_hash, r.round, r.count, r.min, r.mean, r.best_so_far
            ));
        }
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qor::Flow;
    use crate::recommender::InversionConfig;

    fn tiny_cfg() -> LoopConfig {
        LoopConfig {
            initial_size: 30,
            per_round: 8,
            rounds: 1,
            flow: Flow::Esprs,
            ssl: true,
            train: TrainConfig {
                ssl_epochs: 2,
                ssl_samples_per_epoch: 16,
                finetune_epochs: 2,
                batch_size: 16,
                ..Default::default()
            },
            inversion: InversionConfig {
                epochs: 8,
                ramp_epochs: 3,
                keep_fraction: 0.5,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn augmentation_arms_share_the_initial_dataset() {
        let report = augmentation_on_off(&tiny_cfg(), &[4]).unwrap();
        assert_eq!(report.arms.len(), 2);
        assert_eq!(report.arms[0].initial_hash, report.arms[1].initial_hash);
        assert_ne!(report.arms[0].label, report.arms[1].label);
        let csv = ablation_csv(&report);
        assert!(csv.lines().count() >= 5);
    }

    #[test]
    fn ssl_sweep_produces_one_arm_per_checkpoint_per_seed() {
        let report = ssl_epochs_sweep(&tiny_cfg(), &[0, 2], &[1, 2]).unwrap();
        assert_eq!(report.arms.len(), 4);
        // Same-seed arms share the dataset hash.
        assert_eq!(report.arms[0].initial_hash, report.arms[1].initial_hash);
    }
}
