use thiserror::Error;

/// Errors produced by cell construction, decomposition, generation, and
/// simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("truth table has {got} entries, expected {expected}")]
    TableLength { expected: usize, got: usize },

    #[error("code {code} out of range for width {width} ({limit} codes)", limit = 1u32 << width)]
    CodeOutOfRange { code: u32, width: usize },

    #[error("not bijective: output code {code} appears at rows {first_index} and {second_index}")]
    NotBijective {
        code: u32,
        first_index: u32,
        second_index: u32,
    },

    #[error("cell width {width} exceeds cap {cap}")]
    WidthCap { width: usize, cap: usize },

    #[error("wire counts must be at least 1 (got h={h}, v={v})")]
    EmptyWireGroup { h: usize, v: usize },

    #[error("wire index {wire} out of range for width {width}")]
    WireOutOfRange { wire: usize, width: usize },

    #[error("gate target {wire} also listed as a control")]
    TargetIsControl { wire: usize },

    #[error("duplicate control wire {wire}")]
    DuplicateControl { wire: usize },

    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("invalid grid shape: {0}")]
    InvalidShape(String),

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("invalid vertical successor: {0}")]
    InvalidVerticalSuccessor(String),

    #[error("decomposition count {count} exceeds enumeration limit {limit}")]
    CombinatoricsOverLimit { count: u128, limit: u64 },

    #[error("malformed primary inputs: {0}")]
    MalformedInputs(String),

    #[error("test set does not match grid: {0}")]
    ShapeMismatch(String),

    #[error("cell digest mismatch: test set was generated for {expected}, cell is {got}")]
    DigestMismatch { expected: String, got: String },

    #[error("invalid fault: {0}")]
    InvalidFault(String),

    #[error("invalid cell spec: {0}")]
    SpecFormat(String),

    #[error("invalid test set: {0}")]
    TestSetFormat(String),

    #[error("test set disagrees with fault-free simulation: {0}")]
    VectorMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
