use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shapes, ranges).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is not positive definite: pivot {pivot} has value {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("rank-deficient channel submatrix (estimated condition number {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("instance too large: {subsets} subsets exceed the enumeration bound of {bound}")]
    TooLarge { subsets: u128, bound: u128 },

    #[error("invalid topology: {}", .0.join("; "))]
    Topology(Vec<String>),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
