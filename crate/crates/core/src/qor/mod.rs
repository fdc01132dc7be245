// SPDX-License-Identifier: Apache-2.0
//! The internal EDA substitute: exact two-level minimization (CPX metric),
//! gate-level netlist construction (transistor count, depth), and
//! fanout-weighted switching-activity simulation.

pub mod cover;
pub mod evaluate;
pub mod minimize;
pub mod netlist;
pub mod stimuli;

pub use cover::{Cover, Cube};
pub use evaluate::{evaluate, DesignKind, Flow, QorError, QorRecord};
pub use minimize::{cpx, minimize_two_level};
pub use netlist::{build_netlist, simulate_swact, transistor_count, NetKind, Netlist};
pub use stimuli::{gen_stimuli, StimulusConfig};
