//! Boundary-popping replay: given the recorded level contexts of a build,
//! decomposes any substring of the original text into the run-length blocks
//! that recompression pops off its boundaries. The resulting sequence depends
//! only on the substring's content, so it occurs identically at every
//! occurrence — the property the query engine's step bound rests on.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grammar::SymbolId;
use crate::recompress::{LevelContext, LevelKind, Side};

/// Replays boundary popping for `w0`, a substring of the level-0 letter
/// string of the build that produced `contexts`.
///
/// At even levels the leftmost and rightmost blocks pop when their letter had
/// any block of length >= 2 in the full string (block length 1 included); at
/// odd levels the leftmost letter pops when it is on the partition's right
/// side and the rightmost when on the left side. Output order: left pops by
/// ascending level, surviving residue, right pops by descending level.
/// Concatenating the blocks' expansions yields `val(w0)`.
pub fn popped_sequence(
    w0: &[SymbolId],
    contexts: &[LevelContext],
) -> Result<Vec<(SymbolId, u64)>> {
    if w0.is_empty() {
        return Err(Error::EmptyInput);
    }
    // Run-length representation of the current string.
    let mut cur: VecDeque<(SymbolId, u64)> = VecDeque::new();
    for &l in w0 {
        match cur.back_mut() {
            Some(last) if last.0 == l => last.1 += 1,
            _ => cur.push_back((l, 1)),
        }
    }

    let mut left_pops: Vec<(SymbolId, u64)> = Vec::new();
    let mut right_pops: Vec<(SymbolId, u64)> = Vec::new();

    for ctx in contexts {
        if cur.is_empty() {
            break;
        }
        match &ctx.kind {
            LevelKind::Blocks { block_letters, .. } => {
                let in_sigma_b = |l: SymbolId| block_letters.binary_search(&l).is_ok();
                if in_sigma_b(cur.front().unwrap().0) {
                    left_pops.push(cur.pop_front().unwrap());
                }
                if let Some(&(l, _)) = cur.back() {
                    if in_sigma_b(l) {
                        right_pops.push(cur.pop_back().unwrap());
                    }
                }
                let mut next: VecDeque<(SymbolId, u64)> = VecDeque::new();
                for &(l, e) in &cur {
                    let out = if e >= 2 {
                        let fresh = ctx.block_rule(l, e).ok_or_else(|| {
                            Error::Invalid(format!("block {l}^{e} unknown to level {}", ctx.level))
                        })?;
                        (fresh, 1)
                    } else {
                        (l, 1)
                    };
                    // Fresh letters never equal their neighbors here, and the
                    // input was run-length coalesced, so no merging arises.
                    next.push_back(out);
                }
                cur = next;
            }
            LevelKind::Pairs { partition, .. } => {
                let side = |l: SymbolId| partition.side(l);
                if cur.iter().any(|&(_, e)| e != 1) {
                    return Err(Error::Invalid(format!(
                        "string entering pair level {} is not block-free",
                        ctx.level
                    )));
                }
                if side(cur.front().unwrap().0) == Some(Side::Right) {
                    left_pops.push(cur.pop_front().unwrap());
                }
                if let Some(&(l, _)) = cur.back() {
                    if side(l) == Some(Side::Left) {
                        right_pops.push(cur.pop_back().unwrap());
                    }
                }
                let flat: Vec<SymbolId> = cur.iter().map(|&(l, _)| l).collect();
                for &l in &flat {
                    if side(l).is_none() {
                        return Err(Error::Invalid(format!(
                            "letter {l} unknown to level {}",
                            ctx.level
                        )));
                    }
                }
                let mut next: VecDeque<(SymbolId, u64)> = VecDeque::new();
                let mut push = |l: SymbolId| match next.back_mut() {
                    Some(last) if last.0 == l => last.1 += 1,
                    _ => next.push_back((l, 1)),
                };
                let mut i = 0;
                while i < flat.len() {
                    if i + 1 < flat.len()
                        && side(flat[i]) == Some(Side::Left)
                        && side(flat[i + 1]) == Some(Side::Right)
                    {
                        let fresh = ctx.pair_rule(flat[i], flat[i + 1]).ok_or_else(|| {
                            Error::Invalid(format!(
                                "pair ({}, {}) unknown to level {}",
                                flat[i],
                                flat[i + 1],
                                ctx.level
                            ))
                        })?;
                        push(fresh);
                        i += 2;
                    } else {
                        push(flat[i]);
                        i += 1;
                    }
                }
                cur = next;
            }
        }
    }

    let mut out = left_pops;
    out.extend(cur);
    out.extend(right_pops.into_iter().rev());
    Ok(out)
}

/// Flattens run-length blocks into the plain letter sequence.
pub fn flatten_blocks(blocks: &[(SymbolId, u64)]) -> Vec<SymbolId> {
    let mut out = Vec::new();
    for &(l, e) in blocks {
        for _ in 0..e {
            out.push(l);
        }
    }
    out
}
