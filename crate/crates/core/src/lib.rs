// SPDX-License-Identifier: Apache-2.0
//! Search engine for 4-bit operand encodings that minimize synthesis quality
//! metrics of lookup-table designs (multipliers and Moore FSM logic).
//!
//! The pipeline: an [`encoding::Encoding`] is turned into a truth table by
//! [`design`], scored by the exact two-level oracle in [`qor`], learned by the
//! transformer surrogate in [`surrogate`], and new candidates come out of
//! [`recommender`] (gradient inversion of the surrogate) or the surrogate-free
//! [`baselines`]. [`orchestrator`] wires the whole generation loop together.

pub mod baselines;
pub mod design;
pub mod encoding;
pub mod orchestrator;
pub mod qor;
pub mod recommender;
pub mod surrogate;
