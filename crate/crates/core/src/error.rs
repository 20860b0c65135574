use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarnotError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("structure constants are not antisymmetric at (i={i}, j={j}, l={l})")]
    Antisymmetry { i: usize, j: usize, l: usize },

    #[error("not a step-two Carnot group of the declared dimensions: bracket rank {rank} < d2 = {d2}")]
    NotStepTwo { rank: usize, d2: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("inconclusive: {reason} (best residual {best_residual:.3e})")]
    Inconclusive { reason: String, best_residual: f64 },
}

pub type Result<T> = std::result::Result<T, CarnotError>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(CarnotError::Dimension {
            what,
            expected,
            got,
        })
    }
}
