// SPDX-License-Identifier: Apache-2.0
//! Append-only dataset store keyed by canonical encoding, with a JSON-lines
//! journal whose replay reconstructs the exact store state.

use super::config::TargetMetric;
use crate::encoding::Encoding;
use crate::qor::QorRecord;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

/// One journal line: an evaluated record or a round-level error.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum JournalEntry {
    Record(QorRecord),
    Error { round: u32, message: String },
}

#[derive(Debug, Default, Clone)]
pub struct DatasetStore {
    records: Vec<QorRecord>,
    index: BTreeMap<u64, usize>,
    errors: Vec<(u32, String)>,
}

impl DatasetStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a record unless its canonical encoding is already present.
    pub fn insert(&mut self, record: QorRecord) -> bool {
        let key = record.encoding.packed();
        if self.index.contains_key(&key) {
            return false;
        }
        self.index.insert(key, self.records.len());
        self.records.push(record);
        true
    }

    pub fn contains(&self, canonical: &Encoding) -> bool {
        self.index.contains_key(&canonical.packed())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[QorRecord] {
        &self.records
    }

    pub fn record_error(&mut self, round: u32, message: String) {
        self.errors.push((round, message));
    }

    pub fn errors(&self) -> &[(u32, String)] {
        &self.errors
    }

    /// Training pairs (encoding, metric) for records carrying the target.
    pub fn dataset(&self, target: TargetMetric) -> Vec<(Encoding, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.metric(target).map(|m| (r.encoding, m)))
            .collect()
    }

    /// (min, mean, count) of the target metric over one round's records.
    pub fn round_stats(&self, round: u32, target: TargetMetric) -> Option<(f64, f64, usize)> {
        let metrics: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.round == round)
            .filter_map(|r| r.metric(target))
            .collect();
        if metrics.is_empty() {
            return None;
        }
        let min = metrics.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = metrics.iter().sum::<f64>() / metrics.len() as f64;
        Some((min, mean, metrics.len()))
    }

    /// Best record under the target metric (ties by insertion order).
    pub fn best(&self, target: TargetMetric) -> Option<&QorRecord> {
        self.records
            .iter()
            .filter(|r| r.metric(target).is_some())
            .min_by(|a, b| a.metric(target).unwrap().total_cmp(&b.metric(target).unwrap()))
    }

    /// The journal as serialized bytes (one JSON entry per line, insertion
    /// order, errors appended after the records they follow is preserved by
    /// the writer; this form is used for whole-store snapshots).
    pub fn journal_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, &JournalEntry::Record(r.clone())).expect("serialize");
            out.push(b'\n');
        }
        for (round, message) in &self.errors {
            serde_json::to_writer(
                &mut out,
                &JournalEntry::Error { round: *round, message: message.clone() },
            )
            .expect("serialize");
            out.push(b'\n');
        }
        out
    }

    /// FNV-1a hash of the journal bytes; replaying a journal reproduces it.
    pub fn hash(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        for b in self.journal_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    pub fn write_journal(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.journal_bytes())
    }

    /// Reconstructs a store from a journal file.
    pub fn replay(path: &Path) -> std::io::Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut store = Self::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: JournalEntry = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string())
            })?;
            match entry {
                JournalEntry::Record(r) => {
                    store.insert(r);
                }
                JournalEntry::Error { round, message } => store.record_error(round, message),
            }
        }
        Ok(store)
    }
}
