// SPDX-License-Identifier: Apache-2.0
//! Turns an encoding into a concrete combinational design: the complete truth
//! table of a 4x4 multiplier LUT or of a Moore FSM's next-state/output logic,
//! plus export to the case-statement Verilog form.

use crate::encoding::{Encoding, MIN_VALUE, VALUE_COUNT, WORD_BITS};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Complete input -> output bit relation of a design. `rows[p]` holds the
/// output bits for input pattern `p`; outputs are at most 8 bits wide.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthTable {
    pub n_inputs: u32,
    pub n_outputs: u32,
    rows: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DesignError {
    #[error("rows length {got} does not match 2^{n_inputs}")]
    RowCount { got: usize, n_inputs: u32 },
    #[error("output width {0} exceeds the supported 8 bits")]
    OutputWidth(u32),
    #[error("clause {index} references invalid state {state}")]
    InvalidState { index: usize, state: u8 },
    #[error("expected {expected} transition clauses, got {got}")]
    ClauseCount { expected: usize, got: usize },
}

impl TruthTable {
    pub fn new(n_inputs: u32, n_outputs: u32, rows: Vec<u8>) -> Result<Self, DesignError> {
        if n_outputs > 8 {
            return Err(DesignError::OutputWidth(n_outputs));
        }
        if rows.len() != 1usize << n_inputs {
            return Err(DesignError::RowCount { got: rows.len(), n_inputs });
        }
        Ok(Self { n_inputs, n_outputs, rows })
    }

    /// Output bits for input pattern `pattern`.
    pub fn output(&self, pattern: usize) -> u8 {
        self.rows[pattern]
    }

    pub fn rows(&self) -> &[u8] {
        &self.rows
    }

    pub fn pattern_count(&self) -> usize {
        self.rows.len()
    }

    /// Value of output bit `bit` (0 = least significant) for `pattern`.
    pub fn output_bit(&self, pattern: usize, bit: u32) -> u8 {
        (self.rows[pattern] >> bit) & 1
    }

    /// JSON dump {n_inputs, n_outputs, rows: [hex strings]}.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wire {
            n_inputs: u32,
            n_outputs: u32,
            rows: Vec<String>,
        }
        serde_json::to_string(&Wire {
            n_inputs: self.n_inputs,
            n_outputs: self.n_outputs,
            rows: self.rows.iter().map(|r| format!("{r:02x}")).collect(),
        })
        .expect("truth table serializes")
    }
}

/// Number of input bits of the multiplier LUT: two 4-bit operands.
pub const MULTIPLIER_INPUTS: u32 = 2 * WORD_BITS as u32;
/// The multiplier output is always 8-bit two's complement.
pub const MULTIPLIER_OUTPUTS: u32 = 8;

/// The 8-input, 8-output multiplier table for encoding `e`. Input pattern
/// `a || b` (operand a in the high nibble) maps to the 8-bit two's-complement
/// product of the decoded operand values.
pub fn multiplier_truth_table(e: &Encoding) -> TruthTable {
    let decode = e.decode_table();
    let rows = (0..1usize << MULTIPLIER_INPUTS)
        .map(|pattern| {
            let a = (pattern >> WORD_BITS) as u8 & 0xF;
            let b = pattern as u8 & 0xF;
            let va = decode[a as usize] as i16 + MIN_VALUE as i16;
            let vb = decode[b as usize] as i16 + MIN_VALUE as i16;
            (va * vb) as u8
        })
        .collect();
    TruthTable { n_inputs: MULTIPLIER_INPUTS, n_outputs: MULTIPLIER_OUTPUTS, rows }
}

pub const FSM_STATES: usize = VALUE_COUNT;
pub const FSM_INPUTS: u32 = 3;
pub const FSM_OUTPUTS: u32 = 2;
pub const FSM_CLAUSES: usize = 15;

/// One input bit of a transition clause: fixed level or wildcard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClauseBit {
    Zero,
    One,
    Any,
}

impl ClauseBit {
    fn matches(&self, bit: u8) -> bool {
        match self {
            ClauseBit::Zero => bit == 0,
            ClauseBit::One => bit == 1,
            ClauseBit::Any => true,
        }
    }
}

/// A prioritized transition clause: in state `current`, when the inputs match
/// `pattern`, go to `next`. Earlier clauses win.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionClause {
    pub current: u8,
    pub pattern: [ClauseBit; FSM_INPUTS as usize],
    pub next: u8,
}

/// A 16-state Moore FSM with 3 inputs, 2 outputs and 15 transition clauses.
/// The default rule (no clause matches) holds the current state; outputs
/// depend on the current state only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmSpec {
    pub clauses: Vec<TransitionClause>,
    /// 2-bit Moore output per state.
    pub moore_outputs: [u8; FSM_STATES],
}

impl FsmSpec {
    pub fn validate(&self) -> Result<(), DesignError> {
        if self.clauses.len() != FSM_CLAUSES {
            return Err(DesignError::ClauseCount { expected: FSM_CLAUSES, got: self.clauses.len() });
        }
        for (index, c) in self.clauses.iter().enumerate() {
            if c.current as usize >= FSM_STATES {
                return Err(DesignError::InvalidState { index, state: c.current });
            }
            if c.next as usize >= FSM_STATES {
                return Err(DesignError::InvalidState { index, state: c.next });
            }
        }
        Ok(())
    }

    /// Resolves one step at the value level: first matching clause wins, else
    /// hold. Returns (next state, outputs).
    pub fn step(&self, state: u8, inputs: u8) -> (u8, u8) {
        let next = self
            .clauses
            .iter()
            .find(|c| {
                c.current == state
                    && (0..FSM_INPUTS).all(|j| c.pattern[j as usize].matches((inputs >> (FSM_INPUTS - 1 - j)) & 1))
            })
            .map_or(state, |c| c.next);
        (next, self.moore_outputs[state as usize] & 0x3)
    }
}

/// Uniformly random FSM spec: 15 clauses with uniform current/next states and
/// per-bit input patterns that are 0, 1 or wildcard with probability 1/3 each;
/// uniform 2-bit Moore outputs.
pub fn random_fsm_spec<R: Rng>(rng: &mut R) -> FsmSpec {
    let clauses = (0..FSM_CLAUSES)
        .map(|_| TransitionClause {
            current: rng.gen_range(0..FSM_STATES as u8),
            pattern: core::array::from_fn(|_| match rng.gen_range(0..3u8) {
                0 => ClauseBit::Zero,
                1 => ClauseBit::One,
                _ => ClauseBit::Any,
            }),
            next: rng.gen_range(0..FSM_STATES as u8),
        })
        .collect();
    let moore_outputs = core::array::from_fn(|_| rng.gen_range(0..4u8));
    FsmSpec { clauses, moore_outputs }
}

/// The 7-input (4 state bits high, 3 input bits low), 6-output (4 next-state
/// bits high, 2 output bits low) table of the FSM's combinational logic, with
/// states carried in encoding `e` (row index = state id).
pub fn fsm_truth_table(spec: &FsmSpec, e: &Encoding) -> Result<TruthTable, DesignError> {
    spec.validate()?;
    let decode = e.decode_table();
    let n_inputs = WORD_BITS as u32 + FSM_INPUTS;
    let rows = (0..1usize << n_inputs)
        .map(|pattern| {
            let state_code = (pattern >> FSM_INPUTS) as u8 & 0xF;
            let inputs = pattern as u8 & 0x7;
            let state = decode[state_code as usize];
            let (next_state, outputs) = spec.step(state, inputs);
            (e.rows()[next_state as usize] << FSM_OUTPUTS) | outputs
        })
        .collect();
    TruthTable::new(n_inputs, WORD_BITS as u32 + FSM_OUTPUTS, rows)
}

/// Emits the design as a synthesizable Verilog module: one `sel` input vector,
/// one `out` output reg, and a `unique case` listing every pattern in
/// ascending order, e.g. `8'b00100010 : out = 8'b00000100;`.
pub fn export_verilog(t: &TruthTable, name: &str) -> String {
    let mut v = String::new();
    v.push_str(&format!("module {name} (\n"));
    v.push_str(&format!("    input wire [{}:0] sel,\n", t.n_inputs - 1));
    v.push_str(&format!("    output reg [{}:0] out\n", t.n_outputs - 1));
    v.push_str(");\n\n");
    v.push_str("    always @(sel) begin\n");
    v.push_str("        unique case(sel)\n");
    for pattern in 0..t.pattern_count() {
        v.push_str(&format!(
            "            {}'b{:0in$b} : out = {}'b{:0on$b};\n",
            t.n_inputs,
            pattern,
            t.n_outputs,
            t.output(pattern),
            in = t.n_inputs as usize,
            on = t.n_outputs as usize,
        ));
    }
    v.push_str("        endcase\n");
    v.push_str("    end\n\n");
    v.push_str("endmodule\n");
    v
}
