//! Grammar construction from plain text: alternating block compression (even
//! levels) and pair compression (odd levels) until a single letter remains.
//!
//! The driver keeps the working string in dense rank space — letters live in
//! `[1..k]` where `k` is the number of distinct letters currently in use — so
//! every sort is a counting pass over the current string length. Fresh
//! letters are numbered by the sorted rank of the block `(letter, exponent)`
//! or pair `(left, right)` they replace, which makes builds canonical: the
//! same input always yields the same grammar bytes.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grammar::{GrammarBuilder, Rlslp, SymbolId};

/// The working string `T_h` at compression level `h`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LetterString {
    pub letters: Vec<SymbolId>,
    pub level: u32,
}

impl LetterString {
    pub fn new(letters: Vec<SymbolId>, level: u32) -> Self {
        LetterString { letters, level }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

/// Which side of a partition a letter is on.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Side {
    Left,
    Right,
}

/// A two-coloring of the live alphabet chosen so that at least a quarter of
/// adjacent pairs are compressible.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Partition {
    left: Vec<SymbolId>,
    right: Vec<SymbolId>,
}

impl Partition {
    /// Builds a partition from the two sides (sorted internally).
    pub fn new(mut left: Vec<SymbolId>, mut right: Vec<SymbolId>) -> Self {
        left.sort_unstable();
        right.sort_unstable();
        Partition { left, right }
    }

    pub fn left(&self) -> &[SymbolId] {
        &self.left
    }

    pub fn right(&self) -> &[SymbolId] {
        &self.right
    }

    pub fn side(&self, s: SymbolId) -> Option<Side> {
        if self.left.binary_search(&s).is_ok() {
            Some(Side::Left)
        } else if self.right.binary_search(&s).is_ok() {
            Some(Side::Right)
        } else {
            None
        }
    }

    /// Total weight of adjacency entries covered as left·right pairs.
    pub fn covered_weight(&self, adj: &AdjacencyList) -> u64 {
        let mut covered = 0;
        for e in &adj.entries {
            let (first, second) = e.pair();
            if self.side(first) == Some(Side::Left) && self.side(second) == Some(Side::Right) {
                covered += e.weight;
            }
        }
        covered
    }
}

/// One record of the weighted pair-frequency list: `dir = 0` counts
/// occurrences of `hi·lo`, `dir = 1` counts `lo·hi`, with `hi > lo`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct AdjEntry {
    pub hi: SymbolId,
    pub lo: SymbolId,
    pub dir: u8,
    pub weight: u64,
}

impl AdjEntry {
    /// The pair as it occurs in the string: (first, second).
    pub fn pair(&self) -> (SymbolId, SymbolId) {
        if self.dir == 0 {
            (self.hi, self.lo)
        } else {
            (self.lo, self.hi)
        }
    }
}

/// Weighted, `(hi, lo, dir)`-sorted pair-frequency list.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct AdjacencyList {
    pub entries: Vec<AdjEntry>,
    pub total_weight: u64,
}

/// Fresh letters introduced by a block level, keyed by `(letter, exponent)`.
pub type IntroducedRuns = Vec<((SymbolId, u64), SymbolId)>;
/// Fresh letters introduced by a pair level, keyed by `(left, right)`.
pub type IntroducedPairs = Vec<((SymbolId, SymbolId), SymbolId)>;

/// What one compression level did; enough to replay boundary popping.
#[derive(Clone, Debug)]
pub enum LevelKind {
    /// Even level: block compression. `block_letters` lists the letters that
    /// had a block of length >= 2 in the input string.
    Blocks {
        block_letters: Vec<SymbolId>,
        introduced: IntroducedRuns,
    },
    /// Odd level: pair compression under `partition`.
    Pairs {
        partition: Partition,
        introduced: IntroducedPairs,
        replaced: u64,
    },
}

/// Per-level build record, kept only when level logging is requested.
#[derive(Clone, Debug)]
pub struct LevelContext {
    pub level: u32,
    pub input_len: u64,
    pub kind: LevelKind,
}

impl LevelContext {
    pub fn block_rule(&self, letter: SymbolId, exponent: u64) -> Option<SymbolId> {
        match &self.kind {
            LevelKind::Blocks { introduced, .. } => introduced
                .binary_search_by_key(&(letter, exponent), |(k, _)| *k)
                .ok()
                .map(|i| introduced[i].1),
            _ => None,
        }
    }

    pub fn pair_rule(&self, left: SymbolId, right: SymbolId) -> Option<SymbolId> {
        match &self.kind {
            LevelKind::Pairs { introduced, .. } => introduced
                .binary_search_by_key(&(left, right), |(k, _)| *k)
                .ok()
                .map(|i| introduced[i].1),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Shared primitives (id space and rank space both use these).
// ---------------------------------------------------------------------------

/// Stable counting sort by `key(item) < universe`.
fn counting_sort_by<T: Copy>(items: &mut Vec<T>, universe: usize, key: impl Fn(&T) -> usize) {
    let mut counts = vec![0usize; universe + 1];
    for it in items.iter() {
        counts[key(it) + 1] += 1;
    }
    for i in 1..counts.len() {
        counts[i] += counts[i - 1];
    }
    let mut out = vec![items[0]; items.len()];
    for it in items.iter() {
        let k = key(it);
        out[counts[k]] = *it;
        counts[k] += 1;
    }
    *items = out;
}

/// Maximal runs of `w` in positional order as (label, exponent, start index).
fn scan_runs(w: &[u32]) -> Vec<(u32, u64, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < w.len() {
        let mut j = i + 1;
        while j < w.len() && w[j] == w[i] {
            j += 1;
        }
        runs.push((w[i], (j - i) as u64, i));
        i = j;
    }
    runs
}

/// Adjacent-pair multiset of `w` coalesced into `(hi, lo, dir, weight)`
/// entries sorted by `(hi, lo, dir)`. Labels must be in `[1..=max_label]`
/// and adjacent letters must differ.
fn adjacency_core(w: &[u32], max_label: usize) -> Result<Vec<(u32, u32, u8, u64)>> {
    let mut triples: Vec<(u32, u32, u8)> = Vec::with_capacity(w.len().saturating_sub(1));
    for pair in w.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a == b {
            return Err(Error::Invalid(format!(
                "adjacent equal letters {a}: input must be block-free"
            )));
        }
        if a > b {
            triples.push((a, b, 0));
        } else {
            triples.push((b, a, 1));
        }
    }
    if triples.is_empty() {
        return Ok(Vec::new());
    }
    counting_sort_by(&mut triples, 2, |t| t.2 as usize);
    counting_sort_by(&mut triples, max_label, |t| t.1 as usize - 1);
    counting_sort_by(&mut triples, max_label, |t| t.0 as usize - 1);
    let mut entries: Vec<(u32, u32, u8, u64)> = Vec::new();
    for t in triples {
        match entries.last_mut() {
            Some(last) if (last.0, last.1, last.2) == t => last.3 += 1,
            _ => entries.push((t.0, t.1, t.2, 1)),
        }
    }
    Ok(entries)
}

/// Greedy directed-cut partition over sorted adjacency entries.
///
/// Letters are taken in increasing order; a letter goes left when its
/// frequency toward the current right side is at least its frequency toward
/// the left side. Afterwards the sides are switched if right·left pairs
/// cover strictly more weight than left·right pairs. Returns the side per
/// label (1 = left, 2 = right) and the covered left·right weight.
fn greedy_partition_core(
    entries: &[(u32, u32, u8, u64)],
    alphabet: impl Iterator<Item = u32>,
    max_label: usize,
) -> (Vec<u8>, u64) {
    let mut side = vec![0u8; max_label + 1];
    let mut ptr = 0;
    for c in alphabet {
        let mut to_left = 0u64;
        let mut to_right = 0u64;
        while ptr < entries.len() && entries[ptr].0 == c {
            let (_, lo, _, w) = entries[ptr];
            match side[lo as usize] {
                1 => to_left += w,
                2 => to_right += w,
                _ => debug_assert!(false, "partner {lo} not yet assigned"),
            }
            ptr += 1;
        }
        side[c as usize] = if to_right >= to_left { 1 } else { 2 };
    }
    debug_assert_eq!(ptr, entries.len());

    let mut cover_lr = 0u64;
    let mut cover_rl = 0u64;
    for &(hi, lo, dir, w) in entries {
        let (first, second) = if dir == 0 { (hi, lo) } else { (lo, hi) };
        match (side[first as usize], side[second as usize]) {
            (1, 2) => cover_lr += w,
            (2, 1) => cover_rl += w,
            _ => {}
        }
    }
    if cover_lr < cover_rl {
        for s in side.iter_mut() {
            *s = match *s {
                1 => 2,
                2 => 1,
                other => other,
            };
        }
        (side, cover_rl)
    } else {
        (side, cover_lr)
    }
}

// ---------------------------------------------------------------------------
// Public operations in letter-id space.
// ---------------------------------------------------------------------------

/// Replaces every character of `text` with a terminal letter. Distinct codes
/// get letters `1..=sigma` in ascending code order; the result is `T_0`.
pub fn letterize(text: &[u32], b: &mut GrammarBuilder) -> Result<LetterString> {
    if text.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut distinct: Vec<u32> = text.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let base = b.next_id();
    let mut ids = Vec::with_capacity(distinct.len());
    for &code in &distinct {
        ids.push(b.push_terminal(code)?);
    }
    debug_assert_eq!(ids[0].get(), base);
    let letters = text
        .iter()
        .map(|c| ids[distinct.binary_search(c).unwrap()])
        .collect();
    Ok(LetterString::new(letters, 0))
}

/// Replaces every maximal block of length >= 2 with a fresh letter. Fresh
/// letters follow the sorted rank of the `(letter, exponent)` pair among the
/// distinct blocks. Returns the compressed string and the introduced rules.
pub fn compress_blocks(
    w: &LetterString,
    b: &mut GrammarBuilder,
) -> Result<(LetterString, IntroducedRuns)> {
    let raw: Vec<u32> = w.letters.iter().map(|s| s.get()).collect();
    let max_label = raw.iter().copied().max().unwrap_or(0) as usize;
    let runs = scan_runs(&raw);
    let mut comp: Vec<(u32, u64, usize)> = runs.iter().filter(|r| r.1 >= 2).copied().collect();
    counting_sort_by_nonempty(&mut comp, raw.len(), |r| r.1 as usize - 1);
    counting_sort_by_nonempty(&mut comp, max_label, |r| r.0 as usize - 1);

    let mut introduced = Vec::new();
    let mut fresh_at = vec![None::<SymbolId>; raw.len()];
    let mut prev = None;
    let mut current = None;
    for &(label, exp, pos) in &comp {
        if prev != Some((label, exp)) {
            let id = b.push_run(SymbolId::new(label), exp, w.level + 1)?;
            introduced.push(((SymbolId::new(label), exp), id));
            current = Some(id);
            prev = Some((label, exp));
        }
        fresh_at[pos] = current;
    }

    let mut out = Vec::with_capacity(runs.len());
    for &(label, exp, pos) in &runs {
        if exp >= 2 {
            out.push(fresh_at[pos].expect("block was named"));
        } else {
            out.push(SymbolId::new(label));
        }
    }
    Ok((LetterString::new(out, w.level + 1), introduced))
}

fn counting_sort_by_nonempty<T: Copy>(
    items: &mut Vec<T>,
    universe: usize,
    key: impl Fn(&T) -> usize,
) {
    if !items.is_empty() {
        counting_sort_by(items, universe, key);
    }
}

/// Weighted adjacency list of a block-free letter string.
pub fn adjacency_list(w: &LetterString) -> Result<AdjacencyList> {
    let raw: Vec<u32> = w.letters.iter().map(|s| s.get()).collect();
    let max_label = raw.iter().copied().max().unwrap_or(0) as usize;
    let entries = adjacency_core(&raw, max_label)?;
    let total_weight = entries.iter().map(|e| e.3).sum();
    debug_assert_eq!(total_weight as usize, w.len().saturating_sub(1));
    Ok(AdjacencyList {
        entries: entries
            .into_iter()
            .map(|(hi, lo, dir, weight)| AdjEntry {
                hi: SymbolId::new(hi),
                lo: SymbolId::new(lo),
                dir,
                weight,
            })
            .collect(),
        total_weight,
    })
}

/// Greedy partition of `alphabet` covering at least a quarter of the total
/// adjacency weight as left·right pairs.
pub fn choose_partition(adj: &AdjacencyList, alphabet: &[SymbolId]) -> Partition {
    let mut labels: Vec<u32> = alphabet.iter().map(|s| s.get()).collect();
    labels.sort_unstable();
    let max_label = labels
        .last()
        .copied()
        .max(adj.entries.last().map(|e| e.hi.get()))
        .unwrap_or(0) as usize;
    let entries: Vec<(u32, u32, u8, u64)> = adj
        .entries
        .iter()
        .map(|e| (e.hi.get(), e.lo.get(), e.dir, e.weight))
        .collect();
    let (side, _) = greedy_partition_core(&entries, labels.iter().copied(), max_label);
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &l in &labels {
        match side[l as usize] {
            1 => left.push(SymbolId::new(l)),
            2 => right.push(SymbolId::new(l)),
            _ => {}
        }
    }
    Partition::new(left, right)
}

/// Replaces every occurrence of a left·right pair with a fresh letter.
/// Fresh letters follow the sorted rank of `(left, right)` among distinct
/// replaced pairs. Returns the compressed string, the introduced rules, and
/// the number of replaced occurrences.
pub fn compress_pairs(
    w: &LetterString,
    p: &Partition,
    b: &mut GrammarBuilder,
) -> Result<(LetterString, IntroducedPairs, u64)> {
    let n = w.len();
    let mut pairs: Vec<(u32, u32, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && w.letters[i] == w.letters[i + 1] {
            return Err(Error::Invalid(format!(
                "adjacent equal letters {}: input must be block-free",
                w.letters[i]
            )));
        }
        if i + 1 < n
            && p.side(w.letters[i]) == Some(Side::Left)
            && p.side(w.letters[i + 1]) == Some(Side::Right)
        {
            pairs.push((w.letters[i].get(), w.letters[i + 1].get(), i));
            i += 2;
        } else {
            i += 1;
        }
    }
    let max_label = w.letters.iter().map(|s| s.get()).max().unwrap_or(0) as usize;
    counting_sort_by_nonempty(&mut pairs, max_label, |t| t.1 as usize - 1);
    counting_sort_by_nonempty(&mut pairs, max_label, |t| t.0 as usize - 1);

    let replaced = pairs.len() as u64;
    let mut introduced = Vec::new();
    let mut fresh_at = vec![None::<SymbolId>; n];
    let mut prev = None;
    let mut current = None;
    for &(a, bb, pos) in &pairs {
        if prev != Some((a, bb)) {
            let id = b.push_pair(SymbolId::new(a), SymbolId::new(bb), w.level + 1)?;
            introduced.push(((SymbolId::new(a), SymbolId::new(bb)), id));
            current = Some(id);
            prev = Some((a, bb));
        }
        fresh_at[pos] = current;
    }

    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if let Some(id) = fresh_at[i] {
            out.push(id);
            i += 2;
        } else {
            out.push(w.letters[i]);
            i += 1;
        }
    }
    Ok((LetterString::new(out, w.level + 1), introduced, replaced))
}

// ---------------------------------------------------------------------------
// The level driver (rank space).
// ---------------------------------------------------------------------------

/// Renames the extended string (old ranks plus `k_old + i` for the i-th new
/// letter) into dense ranks for the next level, keeping id order.
fn rerank(w: Vec<u32>, old: &[SymbolId], new: &[SymbolId]) -> (Vec<u32>, Vec<SymbolId>) {
    let ext = old.len() + new.len();
    let mut present = vec![false; ext + 1];
    for &v in &w {
        present[v as usize] = true;
    }
    let mut map = vec![0u32; ext + 1];
    let mut letters = Vec::new();
    for v in 1..=ext {
        if present[v] {
            letters.push(if v <= old.len() {
                old[v - 1]
            } else {
                new[v - old.len() - 1]
            });
            map[v] = letters.len() as u32;
        }
    }
    (w.into_iter().map(|v| map[v as usize]).collect(), letters)
}

/// Runs compression levels until one letter remains. `w` holds dense ranks
/// into `letters`; `level` is the level of the input string (even levels
/// compress blocks, odd levels compress pairs). Returns the start symbol,
/// the final level, and the recorded contexts.
pub(crate) fn run_levels(
    b: &mut GrammarBuilder,
    mut w: Vec<u32>,
    mut letters: Vec<SymbolId>,
    mut level: u32,
    record: bool,
) -> Result<(SymbolId, u32, Vec<LevelContext>)> {
    // Ranks are packed into 33-bit fields during pair levels.
    if w.len() >= (1 << 31) {
        return Err(Error::Overflow("working string length"));
    }
    let mut contexts = Vec::new();
    while w.len() > 1 {
        let input_len = w.len() as u64;
        let k = letters.len();
        if level.is_multiple_of(2) {
            let runs = scan_runs(&w);
            let mut comp: Vec<(u32, u64, usize)> =
                runs.iter().filter(|r| r.1 >= 2).copied().collect();
            let block_letters = if record {
                let mut present = vec![false; k + 1];
                for &(label, _, _) in &comp {
                    present[label as usize] = true;
                }
                (1..=k)
                    .filter(|&r| present[r])
                    .map(|r| letters[r - 1])
                    .collect()
            } else {
                Vec::new()
            };
            counting_sort_by_nonempty(&mut comp, w.len(), |r| r.1 as usize - 1);
            counting_sort_by_nonempty(&mut comp, k, |r| r.0 as usize - 1);

            let mut introduced = Vec::new();
            let mut new_ids: Vec<SymbolId> = Vec::new();
            let mut value_at = vec![0u32; w.len()];
            let mut prev = None;
            for &(label, exp, pos) in &comp {
                if prev != Some((label, exp)) {
                    let id = b.push_run(letters[label as usize - 1], exp, level + 1)?;
                    if record {
                        introduced.push(((letters[label as usize - 1], exp), id));
                    }
                    new_ids.push(id);
                    prev = Some((label, exp));
                }
                value_at[pos] = (k + new_ids.len()) as u32;
            }

            let mut next = Vec::with_capacity(runs.len());
            for &(label, exp, pos) in &runs {
                next.push(if exp >= 2 { value_at[pos] } else { label });
            }
            debug_assert!(next.windows(2).all(|p| p[0] != p[1]));
            let (nw, nl) = rerank(next, &letters, &new_ids);
            w = nw;
            letters = nl;
            if record {
                contexts.push(LevelContext {
                    level,
                    input_len,
                    kind: LevelKind::Blocks {
                        block_letters,
                        introduced,
                    },
                });
            }
        } else {
            // Raw adjacent pairs packed as (hi << 33) | (lo << 1) | dir and
            // bucketed by hi in one counting pass; the greedy choice and the
            // switch read them unaggregated (unit weights sum the same).
            let mut triples: Vec<u64> = Vec::with_capacity(w.len() - 1);
            for pair in w.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                if a == b {
                    return Err(Error::Internal("pair-compression input contains a block"));
                }
                let (hi, lo, dir) = if a > b { (a, b, 0u64) } else { (b, a, 1u64) };
                triples.push(((hi as u64) << 33) | ((lo as u64) << 1) | dir);
            }
            counting_sort_by(&mut triples, k, |t| (t >> 33) as usize - 1);
            let mut side = vec![0u8; k + 1];
            let mut ptr = 0;
            for c in 1..=k as u64 {
                let (mut to_left, mut to_right) = (0u64, 0u64);
                while ptr < triples.len() && triples[ptr] >> 33 == c {
                    let lo = ((triples[ptr] >> 1) & 0xFFFF_FFFF) as usize;
                    match side[lo] {
                        1 => to_left += 1,
                        2 => to_right += 1,
                        _ => debug_assert!(false, "partner not yet assigned"),
                    }
                    ptr += 1;
                }
                side[c as usize] = if to_right >= to_left { 1 } else { 2 };
            }
            debug_assert_eq!(ptr, triples.len());
            let (mut cover_lr, mut cover_rl) = (0u64, 0u64);
            for &t in &triples {
                let hi = (t >> 33) as usize;
                let lo = ((t >> 1) & 0xFFFF_FFFF) as usize;
                let (first, second) = if t & 1 == 0 { (hi, lo) } else { (lo, hi) };
                match (side[first], side[second]) {
                    (1, 2) => cover_lr += 1,
                    (2, 1) => cover_rl += 1,
                    _ => {}
                }
            }
            let covered = if cover_lr < cover_rl {
                for s in side.iter_mut() {
                    *s = match *s {
                        1 => 2,
                        2 => 1,
                        other => other,
                    };
                }
                cover_rl
            } else {
                cover_lr
            };
            drop(triples);
            if covered * 4 < input_len - 1 {
                return Err(Error::Internal("partition covers less than a quarter"));
            }

            let mut pairs: Vec<(u32, u32, usize)> = Vec::new();
            let mut i = 0;
            while i + 1 < w.len() {
                if side[w[i] as usize] == 1 && side[w[i + 1] as usize] == 2 {
                    pairs.push((w[i], w[i + 1], i));
                    i += 2;
                } else {
                    i += 1;
                }
            }
            debug_assert_eq!(pairs.len() as u64, covered);
            counting_sort_by_nonempty(&mut pairs, k, |t| t.1 as usize - 1);
            counting_sort_by_nonempty(&mut pairs, k, |t| t.0 as usize - 1);

            let replaced = pairs.len() as u64;
            let mut introduced = Vec::new();
            let mut new_ids: Vec<SymbolId> = Vec::new();
            let mut value_at = vec![0u32; w.len()];
            let mut prev = None;
            for &(a, bb, pos) in &pairs {
                if prev != Some((a, bb)) {
                    let id = b.push_pair(
                        letters[a as usize - 1],
                        letters[bb as usize - 1],
                        level + 1,
                    )?;
                    if record {
                        introduced.push((
                            (letters[a as usize - 1], letters[bb as usize - 1]),
                            id,
                        ));
                    }
                    new_ids.push(id);
                    prev = Some((a, bb));
                }
                value_at[pos] = (k + new_ids.len()) as u32;
            }

            let mut next = Vec::with_capacity(w.len() - pairs.len());
            let mut i = 0;
            while i < w.len() {
                if value_at[i] != 0 {
                    next.push(value_at[i]);
                    i += 2;
                } else {
                    next.push(w[i]);
                    i += 1;
                }
            }
            let partition = if record {
                let mut left = Vec::new();
                let mut right = Vec::new();
                for r in 1..=k {
                    match side[r] {
                        1 => left.push(letters[r - 1]),
                        2 => right.push(letters[r - 1]),
                        _ => {}
                    }
                }
                Some(Partition::new(left, right))
            } else {
                None
            };
            let (nw, nl) = rerank(next, &letters, &new_ids);
            w = nw;
            letters = nl;
            if let Some(partition) = partition {
                contexts.push(LevelContext {
                    level,
                    input_len,
                    kind: LevelKind::Pairs {
                        partition,
                        introduced,
                        replaced,
                    },
                });
            }
        }
        level += 1;
    }
    Ok((letters[w[0] as usize - 1], level, contexts))
}

/// Builds the grammar of a token sequence.
pub fn build_from_text(text: &[u32]) -> Result<Rlslp> {
    build_text_full(text, false).map(|(g, _)| g)
}

/// Like [`build_from_text`], also returning the per-level contexts.
pub fn build_from_text_with_log(text: &[u32]) -> Result<(Rlslp, Vec<LevelContext>)> {
    build_text_full(text, true)
}

/// Builds the grammar of a byte string.
pub fn build_from_bytes(text: &[u8]) -> Result<Rlslp> {
    let tokens: Vec<u32> = text.iter().map(|&b| b as u32).collect();
    build_from_text(&tokens)
}

/// Like [`build_from_bytes`], also returning the per-level contexts.
pub fn build_from_bytes_with_log(text: &[u8]) -> Result<(Rlslp, Vec<LevelContext>)> {
    let tokens: Vec<u32> = text.iter().map(|&b| b as u32).collect();
    build_from_text_with_log(&tokens)
}

fn build_text_full(text: &[u32], record: bool) -> Result<(Rlslp, Vec<LevelContext>)> {
    if text.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut b = GrammarBuilder::new();
    let t0 = letterize(text, &mut b)?;
    // Level-0 letters are 1..=sigma in code order, so ids are already ranks.
    let letters: Vec<SymbolId> = (1..=b.len() as u32).map(SymbolId::new).collect();
    let w: Vec<u32> = t0.letters.iter().map(|s| s.get()).collect();
    let (start, _, contexts) = run_levels(&mut b, w, letters, 0, record)?;
    Ok((b.finish(start, text.len() as u64), contexts))
}

/// Writes the optional per-level log: `B <h>: <letters…>` for block levels,
/// `P <h>: L= <letters…> | R= <letters…>` for pair levels.
pub fn write_level_log<W: Write>(contexts: &[LevelContext], mut out: W) -> std::io::Result<()> {
    for ctx in contexts {
        match &ctx.kind {
            LevelKind::Blocks { block_letters, .. } => {
                write!(out, "B {}:", ctx.level)?;
                for l in block_letters {
                    write!(out, " {l}")?;
                }
                writeln!(out)?;
            }
            LevelKind::Pairs { partition, .. } => {
                write!(out, "P {}: L=", ctx.level)?;
                for l in partition.left() {
                    write!(out, " {l}")?;
                }
                write!(out, " | R=")?;
                for l in partition.right() {
                    write!(out, " {l}")?;
                }
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::Rule;

    fn ids(v: &[u32]) -> Vec<SymbolId> {
        v.iter().map(|&x| SymbolId::new(x)).collect()
    }

    fn ls(v: &[u32], level: u32) -> LetterString {
        LetterString::new(ids(v), level)
    }

    /// Builder pre-seeded with `n` terminal letters.
    fn seeded(n: u32) -> GrammarBuilder {
        let mut b = GrammarBuilder::new();
        for c in 0..n {
            b.push_terminal('a' as u32 + c).unwrap();
        }
        b
    }

    #[test]
    fn letterize_assigns_letters_in_code_order() {
        let mut b = GrammarBuilder::new();
        let t = letterize(&"abaabaabb".bytes().map(|c| c as u32).collect::<Vec<_>>(), &mut b)
            .unwrap();
        assert_eq!(t.letters, ids(&[1, 2, 1, 1, 2, 1, 1, 2, 2]));

        let mut b = GrammarBuilder::new();
        let t = letterize(&['a' as u32], &mut b).unwrap();
        assert_eq!(t.letters, ids(&[1]));
        assert_eq!(b.len(), 1);

        let mut b = GrammarBuilder::new();
        let t = letterize(&['b' as u32, 'a' as u32], &mut b).unwrap();
        assert_eq!(t.letters, ids(&[2, 1]));
    }

    #[test]
    fn block_naming_follows_sorted_block_rank() {
        // Distinct blocks {1^2, 1^3, 2^3, 4^2} with next fresh id 5.
        let mut b = seeded(4);
        let w = ls(&[1, 1, 2, 2, 2, 1, 1, 1, 4, 4, 3], 0);
        let (out, introduced) = compress_blocks(&w, &mut b).unwrap();
        let rules: Vec<(u32, Rule)> = introduced
            .iter()
            .map(|&(_, id)| (id.get(), b.rule(id)))
            .collect();
        assert_eq!(
            rules,
            vec![
                (5, Rule::Run(SymbolId::new(1), 2)),
                (6, Rule::Run(SymbolId::new(1), 3)),
                (7, Rule::Run(SymbolId::new(2), 3)),
                (8, Rule::Run(SymbolId::new(4), 2)),
            ]
        );
        assert_eq!(out.letters, ids(&[5, 7, 6, 8, 3]));
    }

    #[test]
    fn single_block_is_replaced_in_place() {
        let mut b = seeded(4);
        let w = ls(&[2, 3, 4, 2, 2, 2, 1, 2, 1, 2, 3], 0);
        let (out, introduced) = compress_blocks(&w, &mut b).unwrap();
        assert_eq!(out.letters, ids(&[2, 3, 4, 5, 1, 2, 1, 2, 3]));
        assert_eq!(introduced.len(), 1);
        assert_eq!(b.rule(SymbolId::new(5)), Rule::Run(SymbolId::new(2), 3));
    }

    #[test]
    fn block_free_input_is_unchanged() {
        let mut b = seeded(3);
        let w = ls(&[1, 2, 3, 1], 0);
        let (out, introduced) = compress_blocks(&w, &mut b).unwrap();
        assert_eq!(out.letters, w.letters);
        assert!(introduced.is_empty());
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn adjacency_list_counts_each_pair_once() {
        let adj = adjacency_list(&ls(&[1, 2, 1, 2, 1], 1)).unwrap();
        let got: Vec<(u32, u32, u8, u64)> = adj
            .entries
            .iter()
            .map(|e| (e.hi.get(), e.lo.get(), e.dir, e.weight))
            .collect();
        assert_eq!(got, vec![(2, 1, 0, 2), (2, 1, 1, 2)]);
        assert_eq!(adj.total_weight, 4);

        let adj = adjacency_list(&ls(&[1], 1)).unwrap();
        assert!(adj.entries.is_empty());

        let adj = adjacency_list(&ls(&[1, 2, 3], 1)).unwrap();
        let got: Vec<(u32, u32, u8, u64)> = adj
            .entries
            .iter()
            .map(|e| (e.hi.get(), e.lo.get(), e.dir, e.weight))
            .collect();
        assert_eq!(got, vec![(2, 1, 1, 1), (3, 2, 1, 1)]);
    }

    #[test]
    fn adjacency_list_rejects_blocks() {
        assert!(adjacency_list(&ls(&[1, 1, 2], 1)).is_err());
    }

    #[test]
    fn partition_of_alternating_string() {
        let w = ls(&[1, 2, 1, 2, 1], 1);
        let adj = adjacency_list(&w).unwrap();
        let p = choose_partition(&adj, &ids(&[1, 2]));
        assert_eq!(p.left(), ids(&[1]));
        assert_eq!(p.right(), ids(&[2]));
        assert_eq!(p.covered_weight(&adj), 2);
        assert!(p.covered_weight(&adj) * 4 >= (w.len() as u64 - 1));
    }

    #[test]
    fn partition_of_single_letter_puts_it_left() {
        let p = choose_partition(&AdjacencyList::default(), &ids(&[1]));
        assert_eq!(p.left(), ids(&[1]));
        assert!(p.right().is_empty());
    }

    #[test]
    fn partition_meets_quarter_bound_checked_by_exhaustion() {
        let w = ls(&[1, 2, 3], 1);
        let adj = adjacency_list(&w).unwrap();
        let p = choose_partition(&adj, &ids(&[1, 2, 3]));
        assert_eq!(p.left(), ids(&[1, 3]));
        assert_eq!(p.right(), ids(&[2]));

        // Exhaustive oracle: the chosen cover meets the bound achievable by
        // some two-coloring (at least ceil((|w|-1)/4) = 1 here).
        let chosen = p.covered_weight(&adj);
        assert!(chosen * 4 >= w.len() as u64 - 1);
        let mut best = 0;
        for mask in 0u32..8 {
            let mut left = Vec::new();
            let mut right = Vec::new();
            for l in 1..=3u32 {
                if mask & (1 << (l - 1)) != 0 {
                    left.push(SymbolId::new(l));
                } else {
                    right.push(SymbolId::new(l));
                }
            }
            best = best.max(Partition::new(left, right).covered_weight(&adj));
        }
        assert!(chosen >= best.div_ceil(4).min(best));
    }

    #[test]
    fn pair_compression_matches_worked_example() {
        // Letters 1..8 live; pairs (1,2) and (3,4) are compressible and get
        // ids 9 and 10 by sorted rank.
        let mut b = seeded(4);
        b.push_run(SymbolId::new(1), 2, 1).unwrap(); // 5
        b.push_run(SymbolId::new(1), 3, 1).unwrap(); // 6
        b.push_run(SymbolId::new(2), 3, 1).unwrap(); // 7
        b.push_run(SymbolId::new(4), 2, 1).unwrap(); // 8
        let w = ls(&[3, 4, 7, 1, 2, 1, 2], 1);
        let p = Partition::new(ids(&[1, 3, 5, 6, 7]), ids(&[2, 4, 8]));
        let (out, introduced, replaced) = compress_pairs(&w, &p, &mut b).unwrap();
        assert_eq!(out.letters, ids(&[10, 7, 9, 9]));
        assert_eq!(replaced, 3);
        assert_eq!(
            introduced
                .iter()
                .map(|&((l, r), id)| (l.get(), r.get(), id.get()))
                .collect::<Vec<_>>(),
            vec![(1, 2, 9), (3, 4, 10)]
        );
    }

    #[test]
    fn pair_compression_with_empty_right_side_is_identity() {
        let mut b = seeded(3);
        let w = ls(&[1, 2, 3], 1);
        let p = Partition::new(ids(&[1, 2, 3]), vec![]);
        let (out, introduced, replaced) = compress_pairs(&w, &p, &mut b).unwrap();
        assert_eq!(out.letters, w.letters);
        assert!(introduced.is_empty());
        assert_eq!(replaced, 0);
    }

    #[test]
    fn pair_compression_basic() {
        let mut b = seeded(2);
        let w = ls(&[1, 2, 1, 2], 1);
        let p = Partition::new(ids(&[1]), ids(&[2]));
        let (out, introduced, replaced) = compress_pairs(&w, &p, &mut b).unwrap();
        assert_eq!(out.letters, ids(&[3, 3]));
        assert_eq!(replaced, 2);
        assert_eq!(introduced.len(), 1);
        assert_eq!(
            b.rule(SymbolId::new(3)),
            Rule::Pair(SymbolId::new(1), SymbolId::new(2))
        );
    }

    #[test]
    fn single_character_text_builds_one_terminal() {
        let g = build_from_bytes(b"a").unwrap();
        assert_eq!(g.symbol_count(), 1);
        assert_eq!(g.height(), 0);
        assert_eq!(g.rule(SymbolId::new(1)).unwrap(), Rule::Terminal('a' as u32));
    }

    #[test]
    fn abab_builds_the_expected_rules() {
        let g = build_from_bytes(b"abab").unwrap();
        let rules: Vec<Rule> = g.symbols().map(|s| g.rule(s).unwrap()).collect();
        assert_eq!(
            rules,
            vec![
                Rule::Terminal('a' as u32),
                Rule::Terminal('b' as u32),
                Rule::Pair(SymbolId::new(1), SymbolId::new(2)),
                Rule::Run(SymbolId::new(3), 2),
            ]
        );
        assert_eq!(g.start(), SymbolId::new(4));
    }

    #[test]
    fn expansion_round_trips_and_pair_levels_shrink() {
        let text = b"abaabaabb";
        let (g, ctxs) = build_from_bytes_with_log(text).unwrap();
        assert_eq!(g.extract_bytes(1, g.text_len()).unwrap(), text);
        for ctx in &ctxs {
            if let LevelKind::Pairs { replaced, .. } = ctx.kind {
                assert!(replaced * 4 >= ctx.input_len - 1);
            }
        }
    }

    #[test]
    fn builds_are_deterministic() {
        let text: Vec<u8> = (0..500u64).map(|i| (i * 2654435761 % 7) as u8 + b'a').collect();
        let a = build_from_bytes(&text).unwrap().to_file_string();
        let b = build_from_bytes(&text).unwrap().to_file_string();
        assert_eq!(a, b);
    }

    /// Full trace over a four-letter text whose compression exercises every
    /// level kind; rule numbering and per-level partitions are pinned.
    #[test]
    fn four_letter_text_reproduces_pinned_trace() {
        let t0: &[u32] = &[
            3, 1, 1, 1, 2, 3, 4, 2, 2, 2, 1, 2, 1, 2, 3, 4, 1, 1, 2, 3, 4, 2, 2, 2, 1, 2, 1, 2,
            3, 4, 4,
        ];
        let text: Vec<u32> = t0.iter().map(|&l| 'a' as u32 + l - 1).collect();
        let (g, ctxs) = build_from_text_with_log(&text).unwrap();

        let expected: Vec<Rule> = vec![
            Rule::Terminal('a' as u32),
            Rule::Terminal('b' as u32),
            Rule::Terminal('c' as u32),
            Rule::Terminal('d' as u32),
            Rule::Run(SymbolId::new(1), 2),  // 5
            Rule::Run(SymbolId::new(1), 3),  // 6
            Rule::Run(SymbolId::new(2), 3),  // 7
            Rule::Run(SymbolId::new(4), 2),  // 8
            Rule::Pair(SymbolId::new(1), SymbolId::new(2)), // 9
            Rule::Pair(SymbolId::new(3), SymbolId::new(4)), // 10
            Rule::Pair(SymbolId::new(3), SymbolId::new(8)), // 11
            Rule::Pair(SymbolId::new(5), SymbolId::new(2)), // 12
            Rule::Pair(SymbolId::new(6), SymbolId::new(2)), // 13
            Rule::Run(SymbolId::new(9), 2),  // 14
            Rule::Pair(SymbolId::new(7), SymbolId::new(14)), // 15
            Rule::Pair(SymbolId::new(12), SymbolId::new(10)), // 16
            Rule::Pair(SymbolId::new(13), SymbolId::new(10)), // 17
            Rule::Pair(SymbolId::new(16), SymbolId::new(15)), // 18
            Rule::Pair(SymbolId::new(17), SymbolId::new(15)), // 19
            Rule::Pair(SymbolId::new(3), SymbolId::new(19)), // 20
            Rule::Pair(SymbolId::new(10), SymbolId::new(18)), // 21
            Rule::Pair(SymbolId::new(20), SymbolId::new(21)), // 22
            Rule::Pair(SymbolId::new(22), SymbolId::new(11)), // 23
        ];
        let rules: Vec<Rule> = g.symbols().map(|s| g.rule(s).unwrap()).collect();
        assert_eq!(rules, expected);
        assert_eq!(g.start(), SymbolId::new(23));
        assert_eq!(ctxs.len(), 12);

        let block_letters = |i: usize| match &ctxs[i].kind {
            LevelKind::Blocks { block_letters, .. } => block_letters.clone(),
            _ => panic!("level {i} should compress blocks"),
        };
        let partition = |i: usize| match &ctxs[i].kind {
            LevelKind::Pairs { partition, .. } => partition.clone(),
            _ => panic!("level {i} should compress pairs"),
        };
        assert_eq!(block_letters(0), ids(&[1, 2, 4]));
        assert_eq!(partition(1), Partition::new(ids(&[1, 3, 5, 6, 7]), ids(&[2, 4, 8])));
        assert_eq!(block_letters(2), ids(&[9]));
        assert_eq!(
            partition(3),
            Partition::new(ids(&[3, 7, 11, 12, 13]), ids(&[10, 14]))
        );
        assert!(block_letters(4).is_empty());
        assert_eq!(
            partition(5),
            Partition::new(ids(&[3, 10, 11, 16, 17]), ids(&[15]))
        );
        assert!(block_letters(6).is_empty());
        assert_eq!(partition(7), Partition::new(ids(&[3, 10, 11]), ids(&[18, 19])));
        assert!(block_letters(8).is_empty());
        assert_eq!(partition(9), Partition::new(ids(&[11, 20]), ids(&[21])));
        assert!(block_letters(10).is_empty());
        assert_eq!(partition(11), Partition::new(ids(&[22]), ids(&[11])));

        let back = g.extract(1, g.text_len()).unwrap();
        assert_eq!(back, text);
        // Rule 5 is letter 1 squared; letter 1 generates 'a'.
        assert_eq!(
            g.expand(SymbolId::new(5), 10).unwrap(),
            vec!['a' as u32, 'a' as u32]
        );
    }

    #[test]
    fn level_log_format() {
        let ctxs = vec![
            LevelContext {
                level: 0,
                input_len: 10,
                kind: LevelKind::Blocks {
                    block_letters: ids(&[1, 2, 4]),
                    introduced: vec![],
                },
            },
            LevelContext {
                level: 1,
                input_len: 8,
                kind: LevelKind::Pairs {
                    partition: Partition::new(ids(&[1, 3]), ids(&[2])),
                    introduced: vec![],
                    replaced: 3,
                },
            },
        ];
        let mut buf = Vec::new();
        write_level_log(&ctxs, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "B 0: 1 2 4\nP 1: L= 1 3 | R= 2\n"
        );
    }
}
