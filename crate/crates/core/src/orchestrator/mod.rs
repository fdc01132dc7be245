// SPDX-License-Identifier: Apache-2.0
//! The generation loop: dataset store, rounds wiring evaluation -> finetune ->
//! recommend -> evaluate, ablation modes and report emission.

pub mod ablate;
pub mod config;
pub mod report;
pub mod runner;
pub mod store;

pub use ablate::{ablation_csv, augmentation_on_off, ssl_epochs_sweep, AblationReport};
pub use config::{subseed, DesignChoice, LoopConfig, RecommenderKind, TargetMetric};
pub use runner::{run_loop, run_rounds, seed_dataset, LoopError, LoopReport, RoundStats};
pub use store::{DatasetStore, JournalEntry};
