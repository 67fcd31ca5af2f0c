use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed symbol {0:?}")]
    BadSymbol(String),
    #[error("empty pattern")]
    EmptyPattern,
    #[error("frequency must be at least 1")]
    ZeroFrequency,
    #[error("ID position {position} out of range for pattern of length {len}")]
    BadIdPosition { position: usize, len: usize },
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("empty frequency table")]
    EmptyFrequencyTable,
    #[error("no cost for symbol {0:?}")]
    MissingCost(String),
    #[error("empty New")]
    EmptyNew,
    #[error("expected exactly one New pattern, found {0}")]
    NewCount(usize),
    #[error("nothing to retrieve")]
    NothingToRetrieve,
    #[error("retrieval failed: no alignment encodes every code symbol")]
    RetrievalFailed,
    #[error("cannot extend alignment: {0}")]
    Extension(String),
    #[error("oracle bound exceeded: {0}")]
    OracleSize(String),
    #[error("undefined nonterminal {0:?}")]
    UndefinedNonterminal(String),
    #[error("rule for {0:?} has an empty right-hand side")]
    EmptyRule(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("malformed canonical text: {0}")]
    Canonical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
