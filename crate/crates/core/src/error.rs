use alloc::string::String;

/// Errors reported by constructors and estimators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("singular matrix")]
    Singular,
    #[error("region is unbounded: {0}")]
    Unbounded(String),
    #[error("degenerate region: {0}")]
    Degenerate(String),
    #[error("volume mismatch: {0}")]
    VolumeMismatch(String),
    #[error("translation search failed: {0}")]
    SearchFailure(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
