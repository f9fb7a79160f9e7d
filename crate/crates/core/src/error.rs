use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),
    #[error("degenerate morphology: {0}")]
    DegenerateMorphology(String),
    #[error("inconsistent marginals: {0}")]
    Consistency(String),
    #[error("interference operator must be Hermitian with zero diagonal (deviation {0:e})")]
    OperatorDomain(f64),
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NumericHealth(String),
    #[error("empty split: {0}")]
    EmptySplit(&'static str),
    #[error("degenerate baseline: {0}")]
    DegenerateBaseline(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::ParameterDomain(msg.into())
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            got,
        })
    }
}
