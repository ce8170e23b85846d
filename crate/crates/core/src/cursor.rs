//! Root-to-position paths in the derivation tree.
//!
//! A cursor pins one text position and holds the stack of tree nodes covering
//! it. Advancing pops consumed frames and descends again, so sequential moves
//! cost O(height) amortized even across huge run exponents (run frames store
//! the copy index, not an offset).

use crate::error::{Error, Result};
use crate::grammar::{Rlslp, Rule, SymbolId};

/// Which child of a frame's node the path descends into.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Slot {
    Left,
    Right,
    /// 1-based copy index within a run rule.
    Run(u64),
    /// Terminal frame; the path ends here.
    Leaf,
}

/// One node on the root-to-terminal path.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Frame {
    pub symbol: SymbolId,
    pub slot: Slot,
    /// Absolute 1-based start position of this node's expansion.
    pub start: u64,
}

/// An entry reported by [`Cursor::aligned_symbols`]: a node (or, for runs,
/// the remaining chain of copies) whose expansion begins exactly at the
/// cursor position.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct AlignedSymbol {
    pub symbol: SymbolId,
    /// `Some(r)` when this entry stands for `r` remaining copies of `symbol`
    /// under an enclosing run rule; `None` for a plain node.
    pub run_remainder: Option<u64>,
}

impl AlignedSymbol {
    /// Number of adjacent equal-labelled nodes this entry stands for.
    pub fn count(&self) -> u64 {
        self.run_remainder.unwrap_or(1)
    }

    /// Text length covered by the entry.
    pub fn advance_len(&self, g: &Rlslp) -> Result<u64> {
        Ok(self.count() * g.exp_len(self.symbol)?)
    }
}

/// A movable position in `[1..N+1]`; `N+1` is the one-past-end sentinel with
/// an empty frame stack. Per-query private state: do not share across
/// concurrent queries.
#[derive(Clone, Debug)]
pub struct Cursor<'g> {
    g: &'g Rlslp,
    pos: u64,
    frames: Vec<Frame>,
}

impl<'g> Cursor<'g> {
    /// Builds the unique root-to-terminal path covering `pos` in O(height).
    pub fn seek(g: &'g Rlslp, pos: u64) -> Result<Cursor<'g>> {
        if pos < 1 || pos > g.text_len() + 1 {
            return Err(Error::OutOfRange {
                what: "cursor position",
                value: pos,
                limit: g.text_len() + 1,
            });
        }
        let mut c = Cursor {
            g,
            pos,
            frames: Vec::new(),
        };
        if pos <= g.text_len() {
            c.frames.push(Frame {
                symbol: g.start(),
                slot: Slot::Leaf,
                start: 1,
            });
            c.descend()?;
        }
        Ok(c)
    }

    pub fn pos(&self) -> u64 {
        self.pos
    }

    pub fn is_end(&self) -> bool {
        self.pos == self.g.text_len() + 1
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Moves the cursor `delta` positions to the right.
    pub fn advance(&mut self, delta: u64) -> Result<()> {
        let target = self
            .pos
            .checked_add(delta)
            .ok_or(Error::Overflow("cursor position"))?;
        if target > self.g.text_len() + 1 {
            return Err(Error::OutOfRange {
                what: "cursor position",
                value: target,
                limit: self.g.text_len() + 1,
            });
        }
        if delta == 0 {
            return Ok(());
        }
        self.pos = target;
        if target == self.g.text_len() + 1 {
            self.frames.clear();
            return Ok(());
        }
        // Pop frames whose subtree ends before the target, then descend.
        while let Some(top) = self.frames.last() {
            let len = self.g.exp_len(top.symbol)?;
            if target < top.start + len {
                break;
            }
            self.frames.pop();
        }
        if self.frames.is_empty() {
            self.frames.push(Frame {
                symbol: self.g.start(),
                slot: Slot::Leaf,
                start: 1,
            });
        }
        self.descend()
    }

    /// Extends the path from the current top frame down to a terminal,
    /// fixing each frame's slot along the way.
    fn descend(&mut self) -> Result<()> {
        loop {
            let top = *self.frames.last().expect("descend needs a frame");
            match self.g.rule(top.symbol)? {
                Rule::Terminal(_) => {
                    self.frames.last_mut().unwrap().slot = Slot::Leaf;
                    return Ok(());
                }
                Rule::Pair(l, r) => {
                    let llen = self.g.exp_len(l)?;
                    let offset = self.pos - top.start;
                    let (slot, child, child_start) = if offset < llen {
                        (Slot::Left, l, top.start)
                    } else {
                        (Slot::Right, r, top.start + llen)
                    };
                    self.frames.last_mut().unwrap().slot = slot;
                    self.frames.push(Frame {
                        symbol: child,
                        slot: Slot::Leaf,
                        start: child_start,
                    });
                }
                Rule::Run(b, _) => {
                    let blen = self.g.exp_len(b)?;
                    let k = (self.pos - top.start) / blen; // 0-based copy
                    self.frames.last_mut().unwrap().slot = Slot::Run(k + 1);
                    self.frames.push(Frame {
                        symbol: b,
                        slot: Slot::Leaf,
                        start: top.start + k * blen,
                    });
                }
            }
        }
    }

    /// Lists the path nodes whose expansion begins exactly at the cursor
    /// position, from the level-0 terminal upward. A run frame whose current
    /// copy starts here additionally contributes `(base, copies left)`.
    /// Covered lengths are nondecreasing; ties sit deeper first.
    pub fn aligned_symbols(&self) -> Result<Vec<AlignedSymbol>> {
        if self.is_end() {
            return Err(Error::OutOfRange {
                what: "aligned_symbols position",
                value: self.pos,
                limit: self.g.text_len(),
            });
        }
        let mut out = Vec::new();
        for frame in self.frames.iter().rev() {
            if let Slot::Run(k) = frame.slot {
                if let Rule::Run(b, d) = self.g.rule(frame.symbol)? {
                    let copy_start = frame.start + (k - 1) * self.g.exp_len(b)?;
                    if copy_start == self.pos {
                        out.push(AlignedSymbol {
                            symbol: b,
                            run_remainder: Some(d - k + 1),
                        });
                    }
                }
            }
            if frame.start == self.pos {
                out.push(AlignedSymbol {
                    symbol: frame.symbol,
                    run_remainder: None,
                });
            }
        }
        Ok(out)
    }

    /// Character code of the terminal at the cursor position.
    pub fn terminal(&self) -> Result<u32> {
        let frame = self.frames.last().ok_or(Error::OutOfRange {
            what: "cursor position",
            value: self.pos,
            limit: self.g.text_len(),
        })?;
        match self.g.rule(frame.symbol)? {
            Rule::Terminal(c) => Ok(c),
            _ => Err(Error::Internal("cursor path does not end at a terminal")),
        }
    }
}
