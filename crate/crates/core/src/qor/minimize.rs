// SPDX-License-Identifier: Apache-2.0
//! Exact two-level minimization and the CPX complexity metric.
//!
//! Per output bit this computes all prime implicants (Quine-McCluskey) and
//! then an exact minimum prime cover by branch-and-bound over the unate
//! covering problem. The objective is lexicographic: fewest cubes first, then
//! fewest multi-literal cubes. Both optima are preserved by input permutation
//! and polarity flips, which is what makes CPX invariant across the whole
//! augmentation orbit of an encoding.

use super::cover::{Cover, Cube};
use crate::design::TruthTable;
use rayon::prelude::*;
use std::collections::HashMap;

/// Cube weight encoding the lexicographic objective: cube count dominates,
/// multi-literal cubes break ties. Any cover has fewer than CUBE_WEIGHT cubes.
const CUBE_WEIGHT: u32 = 1 << 16;

fn cube_weight(c: &Cube) -> u32 {
    CUBE_WEIGHT + u32::from(c.literal_count() >= 2)
}

/// Exact minimum two-level cover of every output bit.
pub fn minimize_two_level(t: &TruthTable) -> Cover {
    let outputs = (0..t.n_outputs)
        .into_par_iter()
        .map(|bit| {
            let on_set: Vec<u16> = (0..t.pattern_count())
                .filter(|&p| t.output_bit(p, bit) == 1)
                .map(|p| p as u16)
                .collect();
            minimize_output(t.n_inputs, &on_set)
        })
        .collect();
    Cover { n_inputs: t.n_inputs, outputs }
}

/// CPX of a cover: per output, one AND gate per cube with two or more
/// literals, plus one OR gate when the output has two or more cubes.
pub fn cpx(c: &Cover) -> u32 {
    c.outputs
        .iter()
        .map(|cubes| {
            let ands = cubes.iter().filter(|c| c.literal_count() >= 2).count() as u32;
            let ors = u32::from(cubes.len() >= 2);
            ands + ors
        })
        .sum()
}

pub(crate) fn minimize_output(n_inputs: u32, on_set: &[u16]) -> Vec<Cube> {
    if on_set.is_empty() {
        return vec![];
    }
    if on_set.len() == 1usize << n_inputs {
        return vec![Cube::universe()];
    }
    let primes = prime_implicants(n_inputs, on_set);
    let mut cover = min_cover(on_set, &primes);
    cover.sort_unstable();
    cover
}

/// All prime implicants of the on-set, by combining implicants that differ in
/// one bit, grouped by (mask, popcount) to keep the pairing cheap.
pub(crate) fn prime_implicants(n_inputs: u32, on_set: &[u16]) -> Vec<Cube> {
    let full_mask = ((1u32 << n_inputs) - 1) as u16;
    let mut current: Vec<Cube> = on_set.iter().map(|&m| Cube::new(full_mask, m)).collect();
    let mut primes = Vec::new();
    while !current.is_empty() {
        let mut groups: HashMap<(u16, u32), Vec<usize>> = HashMap::new();
        for (i, c) in current.iter().enumerate() {
            groups.entry((c.mask, c.val.count_ones())).or_default().push(i);
        }
        let mut combined = vec![false; current.len()];
        let mut next: Vec<Cube> = Vec::new();
        for (&(mask, pop), lo) in &groups {
            let Some(hi) = groups.get(&(mask, pop + 1)) else { continue };
            for &i in lo {
                for &j in hi {
                    let diff = current[i].val ^ current[j].val;
                    if diff.count_ones() == 1 {
                        combined[i] = true;
                        combined[j] = true;
                        next.push(Cube::new(mask & !diff, current[i].val & !diff));
                    }
                }
            }
        }
        for (i, cube) in current.iter().enumerate() {
            if !combined[i] {
                primes.push(*cube);
            }
        }
        next.sort_unstable();
        next.dedup();
        current = next;
    }
    primes.sort_unstable();
    primes.dedup();
    primes
}

/// Bitset over the on-set rows (at most 256 minterms for 8 inputs).
type RowSet = [u64; 4];

fn rs_empty() -> RowSet {
    [0; 4]
}
fn rs_set(s: &mut RowSet, i: usize) {
    s[i >> 6] |= 1 << (i & 63);
}
fn rs_and(a: &RowSet, b: &RowSet) -> RowSet {
    [a[0] & b[0], a[1] & b[1], a[2] & b[2], a[3] & b[3]]
}
fn rs_and_not(a: &RowSet, b: &RowSet) -> RowSet {
    [a[0] & !b[0], a[1] & !b[1], a[2] & !b[2], a[3] & !b[3]]
}
fn rs_is_empty(a: &RowSet) -> bool {
    a.iter().all(|&w| w == 0)
}
fn rs_count(a: &RowSet) -> u32 {
    a.iter().map(|w| w.count_ones()).sum()
}
fn rs_iter(a: RowSet) -> impl Iterator<Item = usize> {
    (0..4).flat_map(move |w| {
        let mut word = a[w];
        std::iter::from_fn(move || {
            if word == 0 {
                return None;
            }
            let bit = word.trailing_zeros() as usize;
            word &= word - 1;
            Some((w << 6) | bit)
        })
    })
}

/// Dynamic bitset over columns.
#[derive(Clone)]
struct ColSet(Vec<u64>);

impl ColSet {
    fn full(n: usize) -> Self {
        let mut words = vec![u64::MAX; n.div_ceil(64)];
        if n % 64 != 0 {
            *words.last_mut().unwrap() = (1u64 << (n % 64)) - 1;
        }
        ColSet(words)
    }
    fn contains(&self, i: usize) -> bool {
        self.0[i >> 6] >> (i & 63) & 1 == 1
    }
    fn remove(&mut self, i: usize) {
        self.0[i >> 6] &= !(1 << (i & 63));
    }
    /// a & alive subset of b (on alive columns)?
    fn masked_subset(a: &[u64], b: &[u64], alive: &[u64]) -> bool {
        a.iter()
            .zip(b)
            .zip(alive)
            .all(|((&aw, &bw), &mw)| aw & mw & !bw == 0)
    }
}

struct Problem {
    /// Rows covered by each column.
    col_rows: Vec<RowSet>,
    /// Columns covering each row, ascending.
    row_cols: Vec<Vec<u32>>,
    /// Column bitset per row (same content as row_cols).
    row_colsets: Vec<Vec<u64>>,
    weights: Vec<u32>,
}

/// Exact minimum-weight unate covering over the prime implicants.
fn min_cover(on_set: &[u16], primes: &[Cube]) -> Vec<Cube> {
    let n_rows = on_set.len();
    let n_cols = primes.len();
    let mut col_rows = vec![rs_empty(); n_cols];
    let mut row_cols: Vec<Vec<u32>> = vec![Vec::new(); n_rows];
    for (c, prime) in primes.iter().enumerate() {
        for (r, &m) in on_set.iter().enumerate() {
            if prime.covers(m) {
                rs_set(&mut col_rows[c], r);
                row_cols[r].push(c as u32);
            }
        }
    }
    let col_words = n_cols.div_ceil(64);
    let row_colsets: Vec<Vec<u64>> = row_cols
        .iter()
        .map(|cols| {
            let mut set = vec![0u64; col_words];
            for &c in cols {
                set[c as usize >> 6] |= 1 << (c & 63);
            }
            set
        })
        .collect();
    let weights: Vec<u32> = primes.iter().map(cube_weight).collect();
    let problem = Problem { col_rows, row_cols, row_colsets, weights };

    let mut all_rows = rs_empty();
    for r in 0..n_rows {
        rs_set(&mut all_rows, r);
    }
    let alive_cols = ColSet::full(n_cols);

    // Greedy solution seeds the upper bound.
    let greedy = greedy_cover(&problem, all_rows);
    let mut best_cost: u32 = greedy.iter().map(|&c| problem.weights[c as usize]).sum();
    let mut best = greedy;

    let mut search = Search { problem: &problem, best_cost, best: &mut best };
    search.run(all_rows, alive_cols, Vec::new(), 0);
    best_cost = search.best_cost;
    debug_assert!(best_cost < u32::MAX);

    let mut chosen: Vec<Cube> = best.iter().map(|&c| primes[c as usize]).collect();
    chosen.sort_unstable();
    chosen
}

fn greedy_cover(p: &Problem, mut rows: RowSet) -> Vec<u32> {
    let mut chosen = Vec::new();
    while !rs_is_empty(&rows) {
        let mut best_col = 0u32;
        let mut best_key = (0u32, u32::MAX, u32::MAX);
        for (c, cover) in p.col_rows.iter().enumerate() {
            let gain = rs_count(&rs_and(cover, &rows));
            if gain == 0 {
                continue;
            }
            let key = (gain, u32::MAX - p.weights[c], u32::MAX - c as u32);
            if key > best_key {
                best_key = key;
                best_col = c as u32;
            }
        }
        chosen.push(best_col);
        rows = rs_and_not(&rows, &p.col_rows[best_col as usize]);
    }
    chosen
}

struct Search<'a> {
    problem: &'a Problem,
    best_cost: u32,
    best: &'a mut Vec<u32>,
}

impl Search<'_> {
    fn run(&mut self, mut rows: RowSet, mut cols: ColSet, mut chosen: Vec<u32>, mut cost: u32) {
        let p = self.problem;
        loop {
            if rs_is_empty(&rows) {
                if cost < self.best_cost {
                    self.best_cost = cost;
                    *self.best = chosen;
                }
                return;
            }
            if cost >= self.best_cost {
                return;
            }

            // Essential columns; also detect uncoverable rows.
            let mut essentials: Vec<u32> = Vec::new();
            let mut progress = false;
            for r in rs_iter(rows) {
                let mut count = 0u32;
                let mut only = 0u32;
                for &c in &p.row_cols[r] {
                    if cols.contains(c as usize) {
                        count += 1;
                        only = c;
                        if count > 1 {
                            break;
                        }
                    }
                }
                match count {
                    0 => return,
                    1 => essentials.push(only),
                    _ => {}
                }
            }
            if !essentials.is_empty() {
                essentials.sort_unstable();
                essentials.dedup();
                for &c in &essentials {
                    if !cols.contains(c as usize) {
                        continue; // already taken by an earlier essential
                    }
                    cost += p.weights[c as usize];
                    chosen.push(c);
                    cols.remove(c as usize);
                    rows = rs_and_not(&rows, &p.col_rows[c as usize]);
                }
                if cost >= self.best_cost {
                    return;
                }
                continue;
            }

            // Row dominance: drop a row whose alive column set contains
            // another row's (the weaker row forces the stronger's coverage).
            let alive_rows: Vec<usize> = rs_iter(rows).collect();
            for (i, &a) in alive_rows.iter().enumerate() {
                for &b in alive_rows.iter().skip(i + 1) {
                    let sub_ab = ColSet::masked_subset(&p.row_colsets[a], &p.row_colsets[b], &cols.0);
                    let sub_ba = ColSet::masked_subset(&p.row_colsets[b], &p.row_colsets[a], &cols.0);
                    if sub_ab && sub_ba {
                        // identical: drop the higher-indexed one
                        rows[b >> 6] &= !(1 << (b & 63));
                        progress = true;
                    } else if sub_ab {
                        rows[b >> 6] &= !(1 << (b & 63));
                        progress = true;
                    } else if sub_ba {
                        rows[a >> 6] &= !(1 << (a & 63));
                        progress = true;
                        break;
                    }
                }
            }
            if progress {
                continue;
            }

            // Column dominance on the alive submatrix.
            let alive_col_list: Vec<u32> = (0..p.col_rows.len() as u32)
                .filter(|&c| cols.contains(c as usize))
                .collect();
            let eff: Vec<RowSet> = alive_col_list
                .iter()
                .map(|&c| rs_and(&p.col_rows[c as usize], &rows))
                .collect();
            for (i, &ci) in alive_col_list.iter().enumerate() {
                if eff[i].iter().all(|&w| w == 0) {
                    cols.remove(ci as usize);
                    progress = true;
                    continue;
                }
                for (j, &cj) in alive_col_list.iter().enumerate() {
                    if i == j || !cols.contains(cj as usize) || !cols.contains(ci as usize) {
                        continue;
                    }
                    let i_sub_j = rs_is_empty(&rs_and_not(&eff[i], &eff[j]));
                    if !i_sub_j {
                        continue;
                    }
                    let wi = p.weights[ci as usize];
                    let wj = p.weights[cj as usize];
                    let j_sub_i = rs_is_empty(&rs_and_not(&eff[j], &eff[i]));
                    let drop_i = if j_sub_i && wi == wj {
                        cj < ci // identical columns: keep the lower index
                    } else {
                        wj <= wi
                    };
                    if drop_i {
                        cols.remove(ci as usize);
                        progress = true;
                        break;
                    }
                }
            }
            if progress {
                continue;
            }

            // Lower bound from a greedy independent row set.
            let bound = self.independent_rows_bound(&rows, &cols);
            if cost + bound >= self.best_cost {
                return;
            }

            // Branch on the hardest row; try its columns best-coverage first.
            let branch_row = rs_iter(rows)
                .min_by_key(|&r| p.row_cols[r].iter().filter(|&&c| cols.contains(c as usize)).count())
                .expect("rows nonempty");
            let mut candidates: Vec<u32> = p.row_cols[branch_row]
                .iter()
                .copied()
                .filter(|&c| cols.contains(c as usize))
                .collect();
            candidates.sort_by_key(|&c| {
                (
                    u32::MAX - rs_count(&rs_and(&p.col_rows[c as usize], &rows)),
                    p.weights[c as usize],
                    c,
                )
            });
            let mut remaining = cols;
            for &c in &candidates {
                let mut next_chosen = chosen.clone();
                next_chosen.push(c);
                let next_rows = rs_and_not(&rows, &p.col_rows[c as usize]);
                let mut next_cols = remaining.clone();
                next_cols.remove(c as usize);
                self.run(next_rows, next_cols, next_chosen, cost + p.weights[c as usize]);
                // Completeness: later branches must not reuse this column,
                // every cover through branch_row uses exactly one of them.
                remaining.remove(c as usize);
            }
            return;
        }
    }

    /// Rows that pairwise share no alive column each force a distinct column.
    fn independent_rows_bound(&self, rows: &RowSet, cols: &ColSet) -> u32 {
        let p = self.problem;
        let mut order: Vec<usize> = rs_iter(*rows).collect();
        order.sort_by_key(|&r| p.row_cols[r].iter().filter(|&&c| cols.contains(c as usize)).count());
        let mut blocked = rs_empty();
        let mut bound = 0u32;
        for r in order {
            if blocked[r >> 6] >> (r & 63) & 1 == 1 {
                continue;
            }
            let mut min_w = u32::MAX;
            let mut reach = rs_empty();
            for &c in &p.row_cols[r] {
                if cols.contains(c as usize) {
                    min_w = min_w.min(p.weights[c as usize]);
                    reach = [
                        reach[0] | p.col_rows[c as usize][0],
                        reach[1] | p.col_rows[c as usize][1],
                        reach[2] | p.col_rows[c as usize][2],
                        reach[3] | p.col_rows[c as usize][3],
                    ];
                }
            }
            if min_w == u32::MAX {
                continue;
            }
            bound += min_w;
            blocked = [
                blocked[0] | reach[0],
                blocked[1] | reach[1],
                blocked[2] | reach[2],
                blocked[3] | reach[3],
            ];
        }
        bound
    }
}
