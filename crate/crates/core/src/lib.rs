//! Alignment-based compression engine: patterns of symbols are unified into
//! multiple alignments, scored by how many bits they save in encoding New in
//! terms of Old.

pub mod alignment;
pub mod coding;
pub mod error;
pub mod io;
pub mod matcher;
pub mod oracle;
pub mod pattern;
pub mod search;
pub mod tasks;

pub use alignment::{validate_alignment, Alignment, CdScore, Column};
pub use coding::{
    alignment_probabilities, build_cost_model, derive_encoding, retrieve_by_code, CostModel,
    Encoding,
};
pub use error::{Error, Result};
pub use matcher::{pairwise_match_kbest, PairwiseMatch};
pub use pattern::{Pattern, PatternSpec, PatternStore, Role, Symbol, SymbolTable};
pub use search::{beam_search, SearchOutcome, SearchParams};
