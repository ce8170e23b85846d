//! The run-length grammar data model: rules, expansion-length bookkeeping,
//! validation, substring extraction, and the text file format.
//!
//! A grammar is a straight-line program extended with run-length rules
//! `X -> Y^d` (`d >= 2`). Symbols are dense 1-based integers; pair and run
//! operands always reference smaller ids, so the rule table is acyclic by
//! construction order.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

/// A 1-based grammar symbol. Depending on context it names a terminal letter,
/// a letter introduced by compression, or (on the CFG side) a variable's
/// replacement letter.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct SymbolId(u32);

impl SymbolId {
    /// Creates a symbol id. Panics on 0; ids start at 1.
    pub fn new(id: u32) -> Self {
        assert!(id >= 1, "symbol ids are 1-based");
        SymbolId(id)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub(crate) fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Righthand side of a grammar rule.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Rule {
    /// Produces a single character code.
    Terminal(u32),
    /// Concatenation of two earlier symbols.
    Pair(SymbolId, SymbolId),
    /// `base` repeated `exponent` times, `exponent >= 2`.
    Run(SymbolId, u64),
}

/// A structural problem found by [`Rlslp::validate`]. Violations are data,
/// not failures: readers reject them, in-memory construction reports them.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Violation {
    /// A pair or run operand does not reference a strictly smaller symbol.
    OperandNotSmaller { symbol: SymbolId, operand: SymbolId },
    /// A run rule with exponent < 2.
    RunExponent { symbol: SymbolId, exponent: u64 },
    /// Stored expansion length disagrees with the rule.
    WrongExpansionLength {
        symbol: SymbolId,
        stored: u64,
        computed: u64,
    },
    /// The start symbol does not expand to the recorded text length.
    StartLength { expansion: u64, text_len: u64 },
    /// The start symbol is not a valid id.
    StartOutOfRange { start: SymbolId, symbols: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OperandNotSmaller { symbol, operand } => {
                write!(f, "symbol {symbol}: operand {operand} is not smaller")
            }
            Violation::RunExponent { symbol, exponent } => {
                write!(f, "symbol {symbol}: run exponent {exponent} < 2")
            }
            Violation::WrongExpansionLength {
                symbol,
                stored,
                computed,
            } => write!(
                f,
                "symbol {symbol}: stored expansion length {stored}, rule gives {computed}"
            ),
            Violation::StartLength {
                expansion,
                text_len,
            } => write!(
                f,
                "start symbol expands to {expansion} characters, text length is {text_len}"
            ),
            Violation::StartOutOfRange { start, symbols } => {
                write!(f, "start symbol {start} out of range (grammar has {symbols})")
            }
        }
    }
}

/// A run-length grammar generating exactly one text of `text_len` characters.
///
/// Immutable after construction; safe to share across concurrent readers.
#[derive(Clone, Debug)]
pub struct Rlslp {
    rules: Vec<Rule>,
    start: SymbolId,
    exp_len: Vec<u64>,
    level: Vec<u32>,
    text_len: u64,
}

impl Rlslp {
    /// Assembles a grammar from raw parts without checking invariants.
    /// Use [`Rlslp::validate`] afterwards when the parts are untrusted.
    pub fn from_parts(
        rules: Vec<Rule>,
        start: SymbolId,
        exp_len: Vec<u64>,
        level: Vec<u32>,
        text_len: u64,
    ) -> Self {
        Rlslp {
            rules,
            start,
            exp_len,
            level,
            text_len,
        }
    }

    pub fn symbol_count(&self) -> usize {
        self.rules.len()
    }

    pub fn start(&self) -> SymbolId {
        self.start
    }

    pub fn text_len(&self) -> u64 {
        self.text_len
    }

    pub fn rule(&self, s: SymbolId) -> Result<Rule> {
        self.rules
            .get(s.index())
            .copied()
            .ok_or(Error::UnknownSymbol(s))
    }

    pub fn exp_len(&self, s: SymbolId) -> Result<u64> {
        self.exp_len
            .get(s.index())
            .copied()
            .ok_or(Error::UnknownSymbol(s))
    }

    /// Level at which the symbol was introduced; terminals are level 0.
    /// Parsed grammars carry structural levels (tree height per symbol).
    pub fn level(&self, s: SymbolId) -> Result<u32> {
        self.level
            .get(s.index())
            .copied()
            .ok_or(Error::UnknownSymbol(s))
    }

    pub fn symbols(&self) -> impl Iterator<Item = SymbolId> + '_ {
        (1..=self.rules.len() as u32).map(SymbolId)
    }

    /// Height of the derivation tree with terminals kept as level-0 leaves.
    pub fn height(&self) -> u32 {
        let mut h = vec![0u32; self.rules.len()];
        for (i, rule) in self.rules.iter().enumerate() {
            h[i] = match rule {
                Rule::Terminal(_) => 0,
                Rule::Pair(l, r) => 1 + h[l.index()].max(h[r.index()]),
                Rule::Run(b, _) => 1 + h[b.index()],
            };
        }
        h.get(self.start.index()).copied().unwrap_or(0)
    }

    /// Reports every violated structural invariant; empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let g = self.rules.len();
        if self.start.index() >= g {
            out.push(Violation::StartOutOfRange {
                start: self.start,
                symbols: g,
            });
        }
        let mut computed = vec![0u64; g];
        for (i, rule) in self.rules.iter().enumerate() {
            let id = SymbolId(i as u32 + 1);
            let mut operand_ok = true;
            for op in [rule_left(rule), rule_right(rule)].into_iter().flatten() {
                if op.index() >= i {
                    out.push(Violation::OperandNotSmaller {
                        symbol: id,
                        operand: op,
                    });
                    operand_ok = false;
                }
            }
            let len = if operand_ok {
                match rule {
                    Rule::Terminal(_) => Some(1),
                    Rule::Pair(l, r) => computed[l.index()].checked_add(computed[r.index()]),
                    Rule::Run(b, d) => {
                        if *d < 2 {
                            out.push(Violation::RunExponent {
                                symbol: id,
                                exponent: *d,
                            });
                        }
                        computed[b.index()].checked_mul(*d)
                    }
                }
            } else {
                None
            };
            let len = len.unwrap_or(0);
            computed[i] = len;
            let stored = self.exp_len.get(i).copied().unwrap_or(0);
            if operand_ok && stored != len {
                out.push(Violation::WrongExpansionLength {
                    symbol: id,
                    stored,
                    computed: len,
                });
            }
        }
        if self.start.index() < g {
            let expansion = computed[self.start.index()];
            if expansion != self.text_len {
                out.push(Violation::StartLength {
                    expansion,
                    text_len: self.text_len,
                });
            }
        }
        out
    }

    /// Materializes `val(s)` as character codes. `budget` caps the output
    /// length; expansion of a larger symbol is refused, not truncated.
    pub fn expand(&self, s: SymbolId, budget: u64) -> Result<Vec<u32>> {
        let len = self.exp_len(s)?;
        if len > budget {
            return Err(Error::ExpansionBudget {
                symbol: s,
                length: len,
                budget,
            });
        }
        let mut out = Vec::with_capacity(len as usize);
        self.collect(s, 0, len, &mut out)?;
        Ok(out)
    }

    /// Returns `text[i..i+len-1]` (1-based, inclusive) as character codes.
    /// Costs O(height + len) node visits.
    pub fn extract(&self, i: u64, len: u64) -> Result<Vec<u32>> {
        if i < 1 || i + len > self.text_len + 1 {
            return Err(Error::OutOfRange {
                what: "extract range end",
                value: i.saturating_add(len).saturating_sub(1),
                limit: self.text_len,
            });
        }
        let mut out = Vec::with_capacity(len as usize);
        self.collect(self.start, i - 1, len, &mut out)?;
        Ok(out)
    }

    /// Like [`Rlslp::extract`] but maps codes to bytes; fails on codes > 255.
    pub fn extract_bytes(&self, i: u64, len: u64) -> Result<Vec<u8>> {
        let codes = self.extract(i, len)?;
        codes
            .into_iter()
            .map(|c| {
                u8::try_from(c).map_err(|_| Error::Invalid(format!("character code {c} is not a byte")))
            })
            .collect()
    }

    /// Appends `val(s)[skip .. skip+take]` to `out` without recursion.
    fn collect(&self, s: SymbolId, skip: u64, take: u64, out: &mut Vec<u32>) -> Result<()> {
        let mut stack: Vec<(SymbolId, u64, u64)> = vec![(s, skip, take)];
        while let Some((sym, skip, take)) = stack.pop() {
            if take == 0 {
                continue;
            }
            match self.rule(sym)? {
                Rule::Terminal(c) => out.push(c),
                Rule::Pair(l, r) => {
                    let llen = self.exp_len(l)?;
                    let left_take = if skip < llen {
                        take.min(llen - skip)
                    } else {
                        0
                    };
                    let right_skip = skip.saturating_sub(llen);
                    let right_take = take - left_take;
                    stack.push((r, right_skip, right_take));
                    stack.push((l, skip, left_take));
                }
                Rule::Run(b, _) => {
                    let blen = self.exp_len(b)?;
                    let end = skip + take;
                    let first = skip / blen;
                    let last = (end - 1) / blen;
                    for k in (first..=last).rev() {
                        let copy_start = k * blen;
                        let s0 = skip.max(copy_start) - copy_start;
                        let t = end.min(copy_start + blen) - skip.max(copy_start);
                        stack.push((b, s0, t));
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes the grammar file format: `RLSLP <g> <start> <N>` followed by
    /// one `T`/`P`/`R` record per symbol, LF-terminated.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "RLSLP {} {} {}",
            self.rules.len(),
            self.start,
            self.text_len
        )?;
        for rule in &self.rules {
            match rule {
                Rule::Terminal(c) => writeln!(w, "T {c}")?,
                Rule::Pair(l, r) => writeln!(w, "P {l} {r}")?,
                Rule::Run(b, d) => writeln!(w, "R {b} {d}")?,
            }
        }
        Ok(())
    }

    pub fn to_file_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("grammar file format is ASCII")
    }

    /// Parses the grammar file format, rejecting malformed records with their
    /// line number. Expansion lengths are recomputed; the header text length
    /// is kept as recorded so `validate` can flag a mismatch.
    pub fn parse_str(input: &str) -> Result<Rlslp> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "RLSLP" {
            return Err(Error::Parse {
                line: 1,
                message: "expected `RLSLP <g> <start> <N>`".into(),
            });
        }
        let g: usize = parse_num(fields[1], 1, "symbol count")?;
        let start: u32 = parse_num(fields[2], 1, "start symbol")?;
        let text_len: u64 = parse_num(fields[3], 1, "text length")?;
        if g == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "grammar must have at least one symbol".into(),
            });
        }
        if start == 0 || start as usize > g {
            return Err(Error::Parse {
                line: 1,
                message: format!("start symbol {start} out of range [1..{g}]"),
            });
        }

        let mut rules = Vec::with_capacity(g);
        let mut exp_len: Vec<u64> = Vec::with_capacity(g);
        let mut level: Vec<u32> = Vec::with_capacity(g);
        for (idx, raw) in lines {
            let line_no = idx + 1;
            if rules.len() == g {
                if raw.trim().is_empty() {
                    continue;
                }
                return Err(Error::Parse {
                    line: line_no,
                    message: "trailing content after last symbol".into(),
                });
            }
            let k = rules.len(); // 0-based id of the symbol being read
            let fields: Vec<&str> = raw.split_whitespace().collect();
            let operand = |s: &str, what: &'static str| -> Result<SymbolId> {
                let v: u32 = parse_num(s, line_no, what)?;
                if v == 0 || v as usize > k {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("{what} {v} must reference an earlier symbol (< {})", k + 1),
                    });
                }
                Ok(SymbolId(v))
            };
            let (rule, len, lvl) = match fields.as_slice() {
                ["T", code] => {
                    let c: u32 = parse_num(code, line_no, "character code")?;
                    (Rule::Terminal(c), 1u64, 0u32)
                }
                ["P", l, r] => {
                    let l = operand(l, "left operand")?;
                    let r = operand(r, "right operand")?;
                    let len = exp_len[l.index()]
                        .checked_add(exp_len[r.index()])
                        .ok_or(Error::Overflow("expansion length"))?;
                    (
                        Rule::Pair(l, r),
                        len,
                        1 + level[l.index()].max(level[r.index()]),
                    )
                }
                ["R", b, d] => {
                    let b = operand(b, "run base")?;
                    let d: u64 = parse_num(d, line_no, "run exponent")?;
                    if d < 2 {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("run exponent {d} must be >= 2"),
                        });
                    }
                    let len = exp_len[b.index()]
                        .checked_mul(d)
                        .ok_or(Error::Overflow("expansion length"))?;
                    (Rule::Run(b, d), len, 1 + level[b.index()])
                }
                [] => continue,
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "expected `T <code>`, `P <left> <right>` or `R <base> <exponent>`"
                            .into(),
                    })
                }
            };
            rules.push(rule);
            exp_len.push(len);
            level.push(lvl);
        }
        if rules.len() != g {
            return Err(Error::Parse {
                line: rules.len() + 1,
                message: format!("header promises {g} symbols, found {}", rules.len()),
            });
        }
        Ok(Rlslp {
            rules,
            start: SymbolId(start),
            exp_len,
            level,
            text_len,
        })
    }
}

fn rule_left(rule: &Rule) -> Option<SymbolId> {
    match rule {
        Rule::Terminal(_) => None,
        Rule::Pair(l, _) => Some(*l),
        Rule::Run(b, _) => Some(*b),
    }
}

fn rule_right(rule: &Rule) -> Option<SymbolId> {
    match rule {
        Rule::Pair(_, r) => Some(*r),
        _ => None,
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what}: `{s}`"),
    })
}

/// Incrementally builds a grammar while compression runs. Fresh ids are
/// allocated densely in creation order.
#[derive(Debug, Default)]
pub struct GrammarBuilder {
    rules: Vec<Rule>,
    exp_len: Vec<u64>,
    level: Vec<u32>,
}

impl GrammarBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn next_id(&self) -> u32 {
        self.rules.len() as u32 + 1
    }

    pub fn exp_len(&self, s: SymbolId) -> u64 {
        self.exp_len[s.index()]
    }

    pub fn rule(&self, s: SymbolId) -> Rule {
        self.rules[s.index()]
    }

    fn alloc(&mut self, rule: Rule, len: u64, level: u32) -> Result<SymbolId> {
        if self.rules.len() >= u32::MAX as usize {
            return Err(Error::Overflow("symbol allocator"));
        }
        self.rules.push(rule);
        self.exp_len.push(len);
        self.level.push(level);
        Ok(SymbolId(self.rules.len() as u32))
    }

    pub fn push_terminal(&mut self, code: u32) -> Result<SymbolId> {
        self.alloc(Rule::Terminal(code), 1, 0)
    }

    pub fn push_pair(&mut self, left: SymbolId, right: SymbolId, level: u32) -> Result<SymbolId> {
        let len = self.exp_len[left.index()]
            .checked_add(self.exp_len[right.index()])
            .ok_or(Error::Overflow("expansion length"))?;
        self.alloc(Rule::Pair(left, right), len, level)
    }

    pub fn push_run(&mut self, base: SymbolId, exponent: u64, level: u32) -> Result<SymbolId> {
        debug_assert!(exponent >= 2);
        let len = self.exp_len[base.index()]
            .checked_mul(exponent)
            .ok_or(Error::Overflow("expansion length"))?;
        self.alloc(Rule::Run(base, exponent), len, level)
    }

    pub fn finish(self, start: SymbolId, text_len: u64) -> Rlslp {
        debug_assert_eq!(self.exp_len[start.index()], text_len);
        Rlslp {
            rules: self.rules,
            start,
            exp_len: self.exp_len,
            level: self.level,
            text_len,
        }
    }
}
