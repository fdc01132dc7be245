// SPDX-License-Identifier: Apache-2.0
//! The quality-metric predictor: transformer regression on encoding tensors,
//! with self-supervised permutation pretraining, supervised finetuning on
//! standardized scores, and exact reverse-mode gradients for both parameters
//! and inputs.

pub mod adam;
pub mod math;
pub mod model;
pub mod train;

pub use adam::Adam;
pub use model::{
    backward_regression, backward_ssl, forward_regression, forward_scalar, forward_ssl,
    inputs_from_soft, Grads, ModelConfig, ParamLayout, SurrogateParams,
};
pub use train::{
    finetune, grad_wrt_input, predict_batch, pretrain_ssl, FinetuneOutcome, ScoreNormalizer,
    TrainConfig, TrainError,
};
