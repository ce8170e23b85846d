//! Longest-common-extension queries by simultaneous cursor traversal.
//!
//! Two cursors walk the derivation tree from positions `i` and `j`. Each
//! iteration lists the nodes aligned at both positions and jumps over the
//! longest equal-labelled match; run remainders compare whole blocks in one
//! step. When no label matches, the level-0 terminals decide: equal advances
//! one character, unequal terminates. Correctness never depends on the label
//! matching — the terminal fallback alone is exact — labels only buy the
//! logarithmic step count.

use crate::cursor::Cursor;
use crate::error::{Error, Result};
use crate::grammar::Rlslp;

/// Query instrumentation.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct LceStats {
    /// Match iterations, including terminal-fallback steps.
    pub steps: u64,
    /// Deepest cursor stack seen during the query.
    pub max_stack_depth: usize,
}

/// Length of the longest common prefix of the suffixes starting at `i` and
/// `j` (1-based). Runs entirely on the grammar; the text is never touched.
pub fn lce(g: &Rlslp, i: u64, j: u64) -> Result<u64> {
    lce_with_stats(g, i, j).map(|(len, _)| len)
}

/// Like [`lce`], also reporting step and stack-depth counts.
pub fn lce_with_stats(g: &Rlslp, i: u64, j: u64) -> Result<(u64, LceStats)> {
    for (what, v) in [("lce position i", i), ("lce position j", j)] {
        if v < 1 || v > g.text_len() {
            return Err(Error::OutOfRange {
                what,
                value: v,
                limit: g.text_len(),
            });
        }
    }
    let mut a = Cursor::seek(g, i)?;
    let mut b = Cursor::seek(g, j)?;
    let mut stats = LceStats {
        steps: 0,
        max_stack_depth: a.frames().len().max(b.frames().len()),
    };
    let mut total = 0u64;
    while !a.is_end() && !b.is_end() {
        stats.steps += 1;
        stats.max_stack_depth = stats
            .max_stack_depth
            .max(a.frames().len())
            .max(b.frames().len());
        let la = a.aligned_symbols()?;
        let lb = b.aligned_symbols()?;

        // Longest equal-labelled advance; ties keep the first (deepest) hit.
        let mut best: Option<u64> = None;
        for ea in &la {
            for eb in &lb {
                if ea.symbol != eb.symbol {
                    continue;
                }
                let adv = ea.count().min(eb.count()) * g.exp_len(ea.symbol)?;
                if best.is_none_or(|cur| adv > cur) {
                    best = Some(adv);
                }
            }
        }
        match best {
            Some(adv) => {
                a.advance(adv)?;
                b.advance(adv)?;
                total += adv;
            }
            None => {
                if a.terminal()? == b.terminal()? {
                    a.advance(1)?;
                    b.advance(1)?;
                    total += 1;
                } else {
                    break;
                }
            }
        }
    }
    Ok((total, stats))
}

/// Character-by-character oracle over the raw text (1-based positions).
pub fn naive_lce<T: Eq>(text: &[T], i: u64, j: u64) -> Result<u64> {
    let n = text.len() as u64;
    for (what, v) in [("lce position i", i), ("lce position j", j)] {
        if v < 1 || v > n {
            return Err(Error::OutOfRange {
                what,
                value: v,
                limit: n,
            });
        }
    }
    let (mut a, mut b) = (i as usize - 1, j as usize - 1);
    let mut len = 0;
    while a < text.len() && b < text.len() && text[a] == text[b] {
        a += 1;
        b += 1;
        len += 1;
    }
    Ok(len)
}
