//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("mesh validation error: {0}")]
    Validation(String),

    #[error("element {element} is degenerate (|det E| = {det:.3e})")]
    DegenerateElement { element: usize, det: f64 },

    #[error("non-manifold edge ({a},{b}) with {count} incident elements")]
    NonManifoldEdge { a: usize, b: usize, count: usize },

    #[error("matrix is not symmetric positive definite (eigenvalues {lo:.6e}, {hi:.6e})")]
    NotSpd { lo: f64, hi: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular factorization at row {row} (pivot {pivot:.3e})")]
    SingularFactorization { row: usize, pivot: f64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("remesh backend failed (status {status:?}): {output}")]
    Backend { status: Option<i32>, output: String },

    #[error("size mismatch: {0}")]
    Mismatch(String),

    #[error("expression error: {0}")]
    Expr(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
