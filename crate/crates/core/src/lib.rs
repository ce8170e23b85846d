//! Compressed longest-common-extension toolkit.
//!
//! Builds a run-length grammar for a text — from the raw bytes or from a
//! straight-line program, without decompressing it — and answers LCE and
//! substring-extraction queries on the grammar in logarithmically many
//! symbol steps. A non-self-referential LZ77 factorizer provides the
//! yardstick the grammar size is measured against.
//!
//! Quick tour:
//!
//! ```
//! use recomp::{build_from_bytes, lce};
//!
//! let g = build_from_bytes(b"abaabaabb").unwrap();
//! assert_eq!(lce(&g, 1, 4).unwrap(), 5);
//! assert_eq!(g.extract_bytes(4, 3).unwrap(), b"aba");
//! ```

mod cfg;
mod cursor;
mod error;
mod grammar;
mod lce;
mod lz77;
mod pseq;
mod recompress;
mod slp;

pub use cfg::{
    build_from_slp, build_from_slp_full, cfg_adjacency_list, cfg_block_compress,
    cfg_pair_compress, uncross_blocks, uncross_pairs, Atom, Schedule, ShapedCfg, SlpBuildReport,
    Weighting,
};
pub use cursor::{AlignedSymbol, Cursor, Frame, Slot};
pub use error::{Error, Result};
pub use grammar::{GrammarBuilder, Rlslp, Rule, SymbolId, Violation};
pub use lce::{lce, lce_with_stats, naive_lce, LceStats};
pub use lz77::{
    lz77_factorize, lz77_factorize_bytes, size_bound_report, Lz77Factorization, SizeBoundReport,
};
pub use pseq::{flatten_blocks, popped_sequence};
pub use recompress::{
    adjacency_list, build_from_bytes, build_from_bytes_with_log, build_from_text,
    build_from_text_with_log, choose_partition, compress_blocks, compress_pairs, letterize,
    write_level_log, AdjEntry, AdjacencyList, LetterString, LevelContext, LevelKind, Partition,
    Side,
};
pub use slp::{Slp, SlpRule, VarId};
