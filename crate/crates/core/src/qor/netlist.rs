// SPDX-License-Identifier: Apache-2.0
//! Gate-level netlist (INV/AND2/OR2) built from a two-level cover, with
//! structural hashing, the fixed transistor-count model, and zero-delay
//! switching-activity simulation under encoded operand stimuli.

use super::cover::Cover;
use crate::encoding::Encoding;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

pub type NetId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateOp {
    Inv,
    And2,
    Or2,
}

/// Static CMOS transistor cost per gate (NAND/NOR plus inverter for the
/// AND/OR, plain inverter for INV).
pub fn gate_transistors(op: GateOp) -> u32 {
    match op {
        GateOp::Inv => 2,
        GateOp::And2 | GateOp::Or2 => 6,
    }
}

/// What drives a net. Gate inputs always reference earlier nets, so the net
/// list is already in topological order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetKind {
    Input(u8),
    Const(bool),
    Gate { op: GateOp, a: NetId, b: NetId }, // b == a for Inv
}

/// A 2-input gate DAG. Nets 0..n_inputs are the primary inputs; every gate
/// adds one net. Outputs reference nets (possibly inputs or constants).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    pub n_inputs: u32,
    nets: Vec<NetKind>,
    outputs: Vec<NetId>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QorError {
    #[error("switching-activity simulation needs at least 2 stimulus cycles, got {0}")]
    InsufficientStimuli(usize),
    #[error("netlist has {got} inputs, expected {expected}")]
    InputArity { got: u32, expected: u32 },
}

impl Netlist {
    pub fn nets(&self) -> &[NetKind] {
        &self.nets
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn gate_count(&self) -> usize {
        self.nets
            .iter()
            .filter(|n| matches!(n, NetKind::Gate { .. }))
            .count()
    }

    /// Evaluates all nets for one input pattern (bit i of `pattern` drives
    /// input net i); returns one bool per net.
    pub fn eval_nets(&self, pattern: u16, values: &mut Vec<bool>) {
        values.clear();
        for kind in &self.nets {
            let v = match *kind {
                NetKind::Input(i) => (pattern >> i) & 1 == 1,
                NetKind::Const(b) => b,
                NetKind::Gate { op, a, b } => {
                    let (va, vb) = (values[a as usize], values[b as usize]);
                    match op {
                        GateOp::Inv => !va,
                        GateOp::And2 => va && vb,
                        GateOp::Or2 => va || vb,
                    }
                }
            };
            values.push(v);
        }
    }

    /// Output bits (bit i = output i) for one input pattern.
    pub fn eval(&self, pattern: u16) -> u8 {
        let mut values = Vec::with_capacity(self.nets.len());
        self.eval_nets(pattern, &mut values);
        self.outputs
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &net)| acc | (u8::from(values[net as usize]) << i))
    }

    /// Logic depth: longest gate path from any input to any output.
    pub fn depth(&self) -> u32 {
        let mut depth = vec![0u32; self.nets.len()];
        for (id, kind) in self.nets.iter().enumerate() {
            if let NetKind::Gate { a, b, .. } = *kind {
                depth[id] = 1 + depth[a as usize].max(depth[b as usize]);
            }
        }
        self.outputs
            .iter()
            .map(|&n| depth[n as usize])
            .max()
            .unwrap_or(0)
    }

    /// Per-net toggle weight: total transistors of the net's fanout gates,
    /// plus one inverter load (2) per primary output port it drives.
    fn net_weights(&self) -> Vec<u64> {
        let mut weights = vec![0u64; self.nets.len()];
        for kind in &self.nets {
            if let NetKind::Gate { op, a, b } = *kind {
                let t = gate_transistors(op) as u64;
                weights[a as usize] += t;
                if op != GateOp::Inv && b != a {
                    weights[b as usize] += t;
                }
            }
        }
        for &out in &self.outputs {
            weights[out as usize] += 2;
        }
        weights
    }
}

/// Total transistor count: INV=2, AND2=6, OR2=6.
pub fn transistor_count(n: &Netlist) -> u32 {
    n.nets
        .iter()
        .map(|k| match k {
            NetKind::Gate { op, .. } => gate_transistors(*op),
            _ => 0,
        })
        .sum()
}

/// Builds the netlist for a cover: one shared inverter per complemented input
/// variable, a balanced AND2 tree per multi-literal cube, a balanced OR2 tree
/// per multi-cube output, and structural hashing merging identical gates.
pub fn build_netlist(c: &Cover) -> Netlist {
    let mut builder = Builder::new(c.n_inputs);
    let outputs = c
        .outputs
        .iter()
        .map(|cubes| {
            let cube_nets: Vec<NetId> = cubes
                .iter()
                .map(|cube| {
                    let literals: Vec<NetId> = (0..c.n_inputs as u16)
                        .filter(|i| cube.mask >> i & 1 == 1)
                        .map(|i| {
                            if cube.val >> i & 1 == 1 {
                                i as NetId
                            } else {
                                builder.gate(GateOp::Inv, i as NetId, i as NetId)
                            }
                        })
                        .collect();
                    match literals.len() {
                        0 => builder.constant(true),
                        _ => builder.balanced_tree(GateOp::And2, literals),
                    }
                })
                .collect();
            match cube_nets.len() {
                0 => builder.constant(false),
                1 => cube_nets[0],
                _ => builder.balanced_tree(GateOp::Or2, cube_nets),
            }
        })
        .collect();
    Netlist { n_inputs: c.n_inputs, nets: builder.nets, outputs }
}

struct Builder {
    nets: Vec<NetKind>,
    strash: HashMap<(GateOp, NetId, NetId), NetId>,
    consts: [Option<NetId>; 2],
}

impl Builder {
    fn new(n_inputs: u32) -> Self {
        Self {
            nets: (0..n_inputs as u8).map(NetKind::Input).collect(),
            strash: HashMap::new(),
            consts: [None, None],
        }
    }

    fn constant(&mut self, v: bool) -> NetId {
        *self.consts[v as usize].get_or_insert_with(|| {
            self.nets.push(NetKind::Const(v));
            (self.nets.len() - 1) as NetId
        })
    }

    fn gate(&mut self, op: GateOp, a: NetId, b: NetId) -> NetId {
        // AND2/OR2 are commutative; normalize operand order for hashing.
        let (a, b) = if op != GateOp::Inv && b < a { (b, a) } else { (a, b) };
        *self.strash.entry((op, a, b)).or_insert_with(|| {
            self.nets.push(NetKind::Gate { op, a, b });
            (self.nets.len() - 1) as NetId
        })
    }

    /// Reduces the nets pairwise, level by level, giving depth ceil(log2(n)).
    fn balanced_tree(&mut self, op: GateOp, mut nets: Vec<NetId>) -> NetId {
        debug_assert!(!nets.is_empty());
        while nets.len() > 1 {
            let mut next = Vec::with_capacity(nets.len().div_ceil(2));
            for pair in nets.chunks(2) {
                next.push(match pair {
                    [a, b] => self.gate(op, *a, *b),
                    [a] => *a,
                    _ => unreachable!(),
                });
            }
            nets = next;
        }
        nets[0]
    }
}

/// One row of the per-net toggle dump (debug interface).
#[derive(Debug, Clone, Serialize)]
pub struct NetToggle {
    pub net: NetId,
    pub flips: u64,
    pub weight: u64,
}

/// Fanout-weighted average switching activity per cycle.
///
/// Each stimulus value pair is encoded through `e` (operand a in the high
/// nibble), the netlist settles instantly, and every net transition between
/// consecutive cycles is counted and weighted by the transistor count of the
/// net's fanout (primary outputs add one inverter load each).
pub fn simulate_swact(
    n: &Netlist,
    e: &Encoding,
    stimuli: &[(i8, i8)],
) -> Result<f64, QorError> {
    simulate_swact_detailed(n, e, stimuli).map(|(swact, _)| swact)
}

/// As [`simulate_swact`] but also returns the per-net flip counts and weights.
pub fn simulate_swact_detailed(
    n: &Netlist,
    e: &Encoding,
    stimuli: &[(i8, i8)],
) -> Result<(f64, Vec<NetToggle>), QorError> {
    if stimuli.len() < 2 {
        return Err(QorError::InsufficientStimuli(stimuli.len()));
    }
    if n.n_inputs != 8 {
        return Err(QorError::InputArity { got: n.n_inputs, expected: 8 });
    }
    let weights = n.net_weights();
    let mut flips = vec![0u64; n.nets.len()];
    let mut prev = Vec::with_capacity(n.nets.len());
    let mut cur = Vec::with_capacity(n.nets.len());
    for (cycle, &(va, vb)) in stimuli.iter().enumerate() {
        let pattern =
            ((e.code_for_value(va) as u16) << 4) | e.code_for_value(vb) as u16;
        n.eval_nets(pattern, &mut cur);
        if cycle > 0 {
            for (i, (&p, &c)) in prev.iter().zip(cur.iter()).enumerate() {
                flips[i] += u64::from(p != c);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let total: u64 = flips
        .iter()
        .zip(weights.iter())
        .map(|(&f, &w)| f * w)
        .sum();
    let toggles = flips
        .iter()
        .zip(weights.iter())
        .enumerate()
        .map(|(net, (&flips, &weight))| NetToggle { net: net as NetId, flips, weight })
        .collect();
    Ok((total as f64 / (stimuli.len() - 1) as f64, toggles))
}
