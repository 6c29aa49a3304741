use thiserror::Error;

/// Crate-wide error type. Numeric failures carry enough context to tell a
/// caller *why* a fit or a selection run died, since cross-validation maps
/// some of these to soft failures (a -inf score) rather than aborting.
#[derive(Error, Debug)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric (max deviation {max_deviation:.3e})")]
    NotSymmetric { max_deviation: f64 },

    #[error("conditional variance collapsed at vertex {vertex} (tau = {tau:.3e}, floor = {floor:.3e})")]
    DegenerateVariance { vertex: usize, tau: f64, floor: f64 },

    #[error("non-finite value encountered in {context}")]
    NonFiniteValue { context: &'static str },

    #[error("non-positive ridged diagonal entry at index {index}")]
    DegenerateDiagonal { index: usize },

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid edge ({j}, {k}) for a graph on {p} vertices")]
    BadEdge { j: usize, k: usize, p: usize },

    #[error("fold count must satisfy 2 <= M <= n (M = {m}, n = {n})")]
    BadFoldCount { m: usize, n: usize },

    #[error("every penalty pair failed on every fold")]
    AllPairsFailed,

    #[error("classifier needs at least two classes, got {got}")]
    BadClassCount { got: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
