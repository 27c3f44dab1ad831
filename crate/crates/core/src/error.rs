use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MespError {
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e}, largest {max_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64, max_eigenvalue: f64 },

    #[error("matrix has no eigenvalue above the rank tolerance")]
    ZeroMatrix,

    #[error("matrix is not symmetric (max relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cardinality {s} is outside [1, {max}]")]
    BadCardinality { s: usize, max: usize },

    #[error("no index k satisfies the separation inequalities (tolerance bug)")]
    NoValidIndex,

    #[error("rank {rank} is smaller than the subset size {s}")]
    RankDeficient { rank: usize, s: usize },

    #[error("column is degenerate for the downdate (|X^+ v| = {norm:e})")]
    DegenerateColumn { norm: f64 },

    #[error("column lies in the current column space (|(I - X^+ X) v| = {norm:e})")]
    InColumnSpace { norm: f64 },

    #[error("iterate collapsed to rank {rank} < s = {s}")]
    RankCollapse { rank: usize, s: usize },

    #[error("certificate kind mismatch")]
    KindMismatch,

    #[error("enumeration of {count} subsets exceeds the cap {cap}")]
    TooLarge { count: f64, cap: usize },

    #[error("selected columns are linearly dependent")]
    DependentColumns,

    #[error("only {positive} positive weights, need at least {s}")]
    InsufficientSupport { positive: usize, s: usize },

    #[error("no remaining column increases the rank (selected {selected} of {s})")]
    RankStarved { selected: usize, s: usize },

    #[error("local optimality violated at pair ({i}, {j}) by {excess:e}")]
    NotLocallyOptimal { i: usize, j: usize, excess: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, MespError>;
