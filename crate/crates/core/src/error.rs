use thiserror::Error;

/// Errors produced by code construction, decoding, training and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("entry {0} is not a binary digit")]
    NotBinary(u8),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("size overflow computing {0}")]
    SizeOverflow(&'static str),
    #[error("enumeration of 2^{rank} codewords exceeds the cap of 2^{cap_log2}")]
    EnumerationTooLarge { rank: usize, cap_log2: u32 },
    #[error("invalid code parameters: {0}")]
    InvalidCode(String),
    #[error("invalid subspace: {0}")]
    InvalidSubspace(String),
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("non-finite LLR at position {0}")]
    NonFiniteLlr(usize),
    #[error("search space of {total} selections exceeds the cap of {cap}; supply a random-search budget")]
    SearchTooLarge { total: u128, cap: u128 },
    #[error("invalid pruning profile: {0}")]
    InvalidProfile(String),
    #[error("weights sum to {0}, expected 1")]
    WeightsNotNormalized(f64),
    #[error("top-k relaxation did not converge within {0} iterations")]
    TopKNotConverged(usize),
    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    TrainingDiverged { iteration: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
