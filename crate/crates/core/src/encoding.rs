// SPDX-License-Identifier: Apache-2.0
//! Operand encodings: bijective maps from the 16 signed values -8..7 to the
//! 16 distinct 4-bit code words, plus the 48-element augmentation group
//! (24 column permutations x optional global bit negation) that leaves the
//! implementation cost of a design unchanged.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Width of one code word, in bits.
pub const WORD_BITS: usize = 4;
/// Number of encoded values (and of code words): 2^WORD_BITS.
pub const VALUE_COUNT: usize = 1 << WORD_BITS;
/// Lowest encoded value; row `i` of an encoding is the code for `MIN_VALUE + i`.
pub const MIN_VALUE: i8 = -8;
/// Highest encoded value.
pub const MAX_VALUE: i8 = 7;
/// Size of the augmentation group: 4! column permutations x 2 polarities.
pub const GROUP_SIZE: usize = 48;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodingError {
    #[error("grid has {rows} rows of width {cols}, expected {expected_rows}x{expected_cols}")]
    Shape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("grid entry at ({row},{col}) is {value}, expected 0 or 1")]
    NonBinary { row: usize, col: usize, value: u8 },
    #[error("rows are not a permutation of the {VALUE_COUNT} possible code words")]
    NotBijective,
}

/// A bijective map from the values -8..7 (ascending, one per row) to 4-bit
/// code words. Row `i` stores the code for value `i - 8` in its low 4 bits;
/// bit 3 is the leftmost character of the written form (e.g. "0011" = 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Encoding {
    rows: [u8; VALUE_COUNT],
}

impl Encoding {
    /// Builds an encoding from 16 code words, checking bijectivity.
    pub fn from_rows(rows: [u8; VALUE_COUNT]) -> Result<Self, EncodingError> {
        let mut seen = [false; VALUE_COUNT];
        for &r in &rows {
            if r as usize >= VALUE_COUNT || seen[r as usize] {
                return Err(EncodingError::NotBijective);
            }
            seen[r as usize] = true;
        }
        Ok(Self { rows })
    }

    /// Two's-complement reference encoding: value 3 -> 0011, value -1 -> 1111.
    pub fn two_complement() -> Self {
        let mut rows = [0u8; VALUE_COUNT];
        for (i, row) in rows.iter_mut().enumerate() {
            let value = i as i8 + MIN_VALUE;
            *row = (value as u8) & 0xF;
        }
        Self { rows }
    }

    /// Sign-magnitude reference encoding: sign bit then 3 magnitude bits.
    ///
    /// -8 has no 4-bit sign-magnitude form; it takes the otherwise-unused
    /// code 1000 ("-0") so the map stays total and bijective.
    pub fn sign_magnitude() -> Self {
        let mut rows = [0u8; VALUE_COUNT];
        for (i, row) in rows.iter_mut().enumerate() {
            let value = i as i8 + MIN_VALUE;
            *row = if value >= 0 {
                value as u8
            } else {
                0x8 | ((-(value as i16)) as u8 & 0x7)
            };
        }
        rows[0] = 0x8; // -8 -> 1000
        Self { rows }
    }

    /// Uniformly samples one of the 16! legal encodings.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let mut rows: [u8; VALUE_COUNT] = core::array::from_fn(|i| i as u8);
        rows.shuffle(rng);
        Self { rows }
    }

    pub fn rows(&self) -> &[u8; VALUE_COUNT] {
        &self.rows
    }

    /// Code word assigned to `value` (must lie in -8..7).
    pub fn code_for_value(&self, value: i8) -> u8 {
        self.rows[(value - MIN_VALUE) as usize]
    }

    /// Value whose code word is `code` (the inverse map; total by bijectivity).
    pub fn value_of_code(&self, code: u8) -> i8 {
        debug_assert!((code as usize) < VALUE_COUNT);
        let idx = self
            .rows
            .iter()
            .position(|&r| r == code)
            .expect("bijective encoding covers every code");
        idx as i8 + MIN_VALUE
    }

    /// Inverse lookup table: `table[code] = row index` of that code.
    pub fn decode_table(&self) -> [u8; VALUE_COUNT] {
        let mut table = [0u8; VALUE_COUNT];
        for (i, &r) in self.rows.iter().enumerate() {
            table[r as usize] = i as u8;
        }
        table
    }

    /// Bit at (row, col); col 0 is the leftmost (most significant) bit.
    pub fn bit(&self, row: usize, col: usize) -> u8 {
        (self.rows[row] >> (WORD_BITS - 1 - col)) & 1
    }

    /// The encoding as a 16x4 binary grid, row-major.
    pub fn to_grid(&self) -> [[u8; WORD_BITS]; VALUE_COUNT] {
        core::array::from_fn(|i| core::array::from_fn(|j| self.bit(i, j)))
    }

    /// Rows packed into one u64, 4 bits per row, row 0 in the top nibble.
    /// Strictly monotone with the row-major lexicographic grid order.
    pub fn packed(&self) -> u64 {
        self.rows
            .iter()
            .fold(0u64, |acc, &r| (acc << WORD_BITS) | r as u64)
    }

    fn row_string(&self, i: usize) -> String {
        (0..WORD_BITS).map(|j| char::from(b'0' + self.bit(i, j))).collect()
    }
}

impl std::fmt::Display for Encoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..VALUE_COUNT {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", self.row_string(i))?;
        }
        Ok(())
    }
}

// Wire format: {"rows": ["0011", ...16 strings...]}, value order -8..7.
impl Serialize for Encoding {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire {
            rows: Vec<String>,
        }
        Wire {
            rows: (0..VALUE_COUNT).map(|i| self.row_string(i)).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Encoding {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            rows: Vec<String>,
        }
        let wire = Wire::deserialize(deserializer)?;
        if wire.rows.len() != VALUE_COUNT {
            return Err(D::Error::custom(format!(
                "expected {VALUE_COUNT} rows, got {}",
                wire.rows.len()
            )));
        }
        let mut rows = [0u8; VALUE_COUNT];
        for (i, s) in wire.rows.iter().enumerate() {
            if s.len() != WORD_BITS || !s.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(D::Error::custom(format!("row {i} is not a 4-bit word: {s:?}")));
            }
            rows[i] = u8::from_str_radix(s, 2).unwrap();
        }
        Encoding::from_rows(rows).map_err(D::Error::custom)
    }
}

/// Checks that a 16x4 binary grid is a legal encoding: every possible 4-bit
/// word appears exactly once among the rows.
pub fn is_legal(grid: &[Vec<u8>]) -> Result<bool, EncodingError> {
    if grid.len() != VALUE_COUNT {
        return Err(EncodingError::Shape {
            rows: grid.len(),
            cols: grid.first().map_or(0, Vec::len),
            expected_rows: VALUE_COUNT,
            expected_cols: WORD_BITS,
        });
    }
    let mut seen = [false; VALUE_COUNT];
    for (i, row) in grid.iter().enumerate() {
        if row.len() != WORD_BITS {
            return Err(EncodingError::Shape {
                rows: grid.len(),
                cols: row.len(),
                expected_rows: VALUE_COUNT,
                expected_cols: WORD_BITS,
            });
        }
        let mut word = 0u8;
        for (j, &b) in row.iter().enumerate() {
            if b > 1 {
                return Err(EncodingError::NonBinary { row: i, col: j, value: b });
            }
            word = (word << 1) | b;
        }
        if seen[word as usize] {
            return Ok(false);
        }
        seen[word as usize] = true;
    }
    Ok(true)
}

/// The relaxed 16x4 real-valued form of an encoding, fed to the surrogate and
/// produced by inversion. Nominal range is [0,1] but any finite values are
/// accepted (legalization tolerates arbitrary finite grids).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftTensor {
    values: Vec<f64>, // row-major 16x4
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SoftTensorError {
    #[error("expected {expected} values (16x4), got {got}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
}

impl SoftTensor {
    pub fn new(values: Vec<f64>) -> Result<Self, SoftTensorError> {
        let expected = VALUE_COUNT * WORD_BITS;
        if values.len() != expected {
            return Err(SoftTensorError::Shape { expected, got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SoftTensorError::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * WORD_BITS..(i + 1) * WORD_BITS]
    }
}

impl From<&Encoding> for SoftTensor {
    fn from(e: &Encoding) -> Self {
        let values = (0..VALUE_COUNT)
            .flat_map(|i| (0..WORD_BITS).map(move |j| (i, j)))
            .map(|(i, j)| e.bit(i, j) as f64)
            .collect();
        Self { values }
    }
}

/// One element of the QoR-preserving augmentation group: permute the four bit
/// columns, then optionally flip every bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AugmentationElement {
    /// Output column `j` takes input column `perm[j]`.
    pub column_permutation: [usize; WORD_BITS],
    pub negate: bool,
}

impl AugmentationElement {
    pub fn identity() -> Self {
        Self { column_permutation: [0, 1, 2, 3], negate: false }
    }

    /// All 48 group elements in a fixed order: permutations in lexicographic
    /// order, plain before negated.
    pub fn all() -> Vec<AugmentationElement> {
        let mut elements = Vec::with_capacity(GROUP_SIZE);
        for &negate in &[false, true] {
            let mut perm = [0usize, 1, 2, 3];
            loop {
                elements.push(AugmentationElement { column_permutation: perm, negate });
                if !next_permutation(&mut perm) {
                    break;
                }
            }
        }
        elements
    }

    /// Group composition: `self.compose(g)` applied to `e` equals
    /// `self.apply(&g.apply(e))` (apply `g` first, then `self`).
    pub fn compose(&self, g: &AugmentationElement) -> AugmentationElement {
        let column_permutation =
            core::array::from_fn(|j| g.column_permutation[self.column_permutation[j]]);
        AugmentationElement { column_permutation, negate: self.negate ^ g.negate }
    }

    /// Applies the element; bijectivity is preserved, so the result is legal.
    pub fn apply(&self, e: &Encoding) -> Encoding {
        let mut rows = [0u8; VALUE_COUNT];
        for (i, row) in rows.iter_mut().enumerate() {
            let mut word = 0u8;
            for j in 0..WORD_BITS {
                word = (word << 1) | e.bit(i, self.column_permutation[j]);
            }
            if self.negate {
                word = !word & 0xF;
            }
            *row = word;
        }
        Encoding { rows }
    }
}

fn next_permutation(perm: &mut [usize; WORD_BITS]) -> bool {
    let n = perm.len();
    let Some(i) = (0..n - 1).rev().find(|&i| perm[i] < perm[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

/// The full orbit of `e` under the augmentation group (distinct members only).
pub fn orbit(e: &Encoding) -> Vec<Encoding> {
    let mut members: Vec<Encoding> = AugmentationElement::all().iter().map(|g| g.apply(e)).collect();
    members.sort();
    members.dedup();
    members
}

/// Deterministic orbit representative: the lexicographically smallest grid
/// (rows concatenated row-major) over the 48-element orbit. Idempotent, and
/// equal for any two encodings related by an augmentation.
pub fn canonical_form(e: &Encoding) -> Encoding {
    AugmentationElement::all()
        .iter()
        .map(|g| g.apply(e))
        .min_by_key(Encoding::packed)
        .expect("group is nonempty")
}
