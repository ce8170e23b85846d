//! Straight-line programs in Chomsky normal form: the input format of the
//! grammar-to-grammar build path.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

/// 1-based variable index; the last variable is the start symbol.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VarId(u32);

impl VarId {
    pub fn new(id: u32) -> Self {
        assert!(id >= 1, "variable ids are 1-based");
        VarId(id)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub(crate) fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Righthand side of an SLP variable.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SlpRule {
    Char(u32),
    Pair(VarId, VarId),
}

/// A straight-line program generating one text. Acyclic by construction:
/// pair operands reference strictly smaller variables.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Slp {
    rules: Vec<SlpRule>,
    char_len: Vec<u64>,
    text_len: u64,
}

impl Slp {
    /// Builds an SLP from rules, checking acyclicity and computing lengths.
    pub fn new(rules: Vec<SlpRule>) -> Result<Slp> {
        if rules.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut char_len: Vec<u64> = Vec::with_capacity(rules.len());
        for (k, rule) in rules.iter().enumerate() {
            let len = match rule {
                SlpRule::Char(_) => 1,
                SlpRule::Pair(l, r) => {
                    if l.index() >= k || r.index() >= k {
                        return Err(Error::Invalid(format!(
                            "variable {} references a non-earlier variable",
                            k + 1
                        )));
                    }
                    char_len[l.index()]
                        .checked_add(char_len[r.index()])
                        .ok_or(Error::Overflow("text length"))?
                }
            };
            char_len.push(len);
        }
        let text_len = *char_len.last().unwrap();
        Ok(Slp {
            rules,
            char_len,
            text_len,
        })
    }

    pub fn var_count(&self) -> usize {
        self.rules.len()
    }

    pub fn start(&self) -> VarId {
        VarId(self.rules.len() as u32)
    }

    pub fn text_len(&self) -> u64 {
        self.text_len
    }

    pub fn rule(&self, v: VarId) -> SlpRule {
        self.rules[v.index()]
    }

    pub fn char_len(&self, v: VarId) -> u64 {
        self.char_len[v.index()]
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        (1..=self.rules.len() as u32).map(VarId)
    }

    /// Number of derivation-tree nodes labelled with each variable,
    /// accumulated top-down over the DAG. Unreachable variables count 0.
    pub fn occurrences(&self) -> Vec<u64> {
        let mut occ = vec![0u64; self.rules.len()];
        occ[self.start().index()] = 1;
        for k in (0..self.rules.len()).rev() {
            let w = occ[k];
            if w == 0 {
                continue;
            }
            if let SlpRule::Pair(l, r) = self.rules[k] {
                occ[l.index()] += w;
                occ[r.index()] += w;
            }
        }
        occ
    }

    /// Materializes the generated text (test and cutover use).
    pub fn expand(&self, budget: u64) -> Result<Vec<u32>> {
        if self.text_len > budget {
            return Err(Error::ExpansionBudget {
                symbol: crate::grammar::SymbolId::new(self.start().get()),
                length: self.text_len,
                budget,
            });
        }
        let mut out = Vec::with_capacity(self.text_len as usize);
        let mut stack = vec![self.start()];
        while let Some(v) = stack.pop() {
            match self.rule(v) {
                SlpRule::Char(c) => out.push(c),
                SlpRule::Pair(l, r) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        Ok(out)
    }

    /// Writes the SLP file format: `SLP <n>` then one record per variable.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "SLP {}", self.rules.len())?;
        for rule in &self.rules {
            match rule {
                SlpRule::Char(c) => writeln!(w, "T {c}")?,
                SlpRule::Pair(l, r) => writeln!(w, "P {l} {r}")?,
            }
        }
        Ok(())
    }

    pub fn to_file_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("SLP file format is ASCII")
    }

    /// Parses the SLP file format, rejecting malformed records and forward
    /// references with their line number.
    pub fn parse_str(input: &str) -> Result<Slp> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 2 || fields[0] != "SLP" {
            return Err(Error::Parse {
                line: 1,
                message: "expected `SLP <n>`".into(),
            });
        }
        let n: usize = fields[1].parse().map_err(|_| Error::Parse {
            line: 1,
            message: format!("invalid variable count: `{}`", fields[1]),
        })?;
        if n == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "SLP must have at least one variable".into(),
            });
        }
        let mut rules = Vec::with_capacity(n);
        let mut char_len: Vec<u64> = Vec::with_capacity(n);
        for (idx, raw) in lines {
            let line_no = idx + 1;
            if rules.len() == n {
                if raw.trim().is_empty() {
                    continue;
                }
                return Err(Error::Parse {
                    line: line_no,
                    message: "trailing content after last variable".into(),
                });
            }
            let k = rules.len();
            let fields: Vec<&str> = raw.split_whitespace().collect();
            let operand = |s: &str, what: &'static str| -> Result<VarId> {
                let v: u32 = s.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("invalid {what}: `{s}`"),
                })?;
                if v == 0 || v as usize > k {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!(
                            "{what} {v} must reference an earlier variable (< {})",
                            k + 1
                        ),
                    });
                }
                Ok(VarId(v))
            };
            match fields.as_slice() {
                ["T", code] => {
                    let c: u32 = code.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("invalid character code: `{code}`"),
                    })?;
                    if c == u32::MAX {
                        return Err(Error::Parse {
                            line: line_no,
                            message: "character code u32::MAX is reserved".into(),
                        });
                    }
                    rules.push(SlpRule::Char(c));
                    char_len.push(1);
                }
                ["P", l, r] => {
                    let l = operand(l, "left operand")?;
                    let r = operand(r, "right operand")?;
                    let len = char_len[l.index()]
                        .checked_add(char_len[r.index()])
                        .ok_or(Error::Overflow("text length"))?;
                    rules.push(SlpRule::Pair(l, r));
                    char_len.push(len);
                }
                [] => continue,
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "expected `T <code>` or `P <left> <right>`".into(),
                    })
                }
            }
        }
        if rules.len() != n {
            return Err(Error::Parse {
                line: rules.len() + 1,
                message: format!("header promises {n} variables, found {}", rules.len()),
            });
        }
        let slp = Slp::new(rules)?;
        // Doubling is the fastest possible growth, so N <= 2^(n-1); relied on
        // by the radix-width reasoning downstream.
        if slp.var_count() < 64 {
            debug_assert!(slp.text_len() <= 1u64 << (slp.var_count() - 1));
        }
        Ok(slp)
    }
}
