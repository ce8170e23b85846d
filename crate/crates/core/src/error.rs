use crate::grammar::SymbolId;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown symbol {0}")]
    UnknownSymbol(SymbolId),

    #[error("{what} {value} out of range [1..{limit}]")]
    OutOfRange {
        what: &'static str,
        value: u64,
        limit: u64,
    },

    #[error("expansion of symbol {symbol} has length {length}, budget is {budget}")]
    ExpansionBudget {
        symbol: SymbolId,
        length: u64,
        budget: u64,
    },

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("internal invariant violated: {0}")]
    Internal(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
