// SPDX-License-Identifier: Apache-2.0
//! Product terms (cubes) and per-output two-level covers.

use crate::design::TruthTable;
use serde::{Deserialize, Serialize};

/// A product term over at most 16 inputs. Bit `i` of `mask` says input `i`
/// carries a literal; the matching bit of `val` gives its polarity. `val` is
/// always stored masked (`val & mask == val`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cube {
    pub mask: u16,
    pub val: u16,
}

impl Cube {
    pub fn new(mask: u16, val: u16) -> Self {
        Self { mask, val: val & mask }
    }

    /// The universal cube (no literals, covers everything).
    pub fn universe() -> Self {
        Self { mask: 0, val: 0 }
    }

    pub fn covers(&self, minterm: u16) -> bool {
        (minterm ^ self.val) & self.mask == 0
    }

    pub fn literal_count(&self) -> u32 {
        self.mask.count_ones()
    }
}

/// Exact two-level cover of a truth table: one cube set per output bit.
/// An empty cube set is the constant-0 output; the universal cube alone is
/// the constant-1 output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cover {
    pub n_inputs: u32,
    pub outputs: Vec<Vec<Cube>>,
}

impl Cover {
    /// Evaluates output bit `bit` on `pattern`.
    pub fn eval_bit(&self, bit: usize, pattern: u16) -> bool {
        self.outputs[bit].iter().any(|c| c.covers(pattern))
    }

    /// Exhaustively checks that every output equals the table on all
    /// 2^n_inputs patterns.
    pub fn matches_table(&self, t: &TruthTable) -> bool {
        if self.n_inputs != t.n_inputs || self.outputs.len() != t.n_outputs as usize {
            return false;
        }
        (0..t.pattern_count()).all(|p| {
            (0..t.n_outputs as usize).all(|bit| {
                self.eval_bit(bit, p as u16) == (t.output_bit(p, bit as u32) == 1)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_cover_semantics() {
        // x1 AND NOT x0
        let c = Cube::new(0b11, 0b10);
        assert!(c.covers(0b10));
        assert!(!c.covers(0b11));
        assert!(!c.covers(0b00));
        assert_eq!(c.literal_count(), 2);
        assert!(Cube::universe().covers(0b1111));
    }

    #[test]
    fn val_is_normalized_to_mask() {
        assert_eq!(Cube::new(0b01, 0b11), Cube::new(0b01, 0b01));
    }
}
