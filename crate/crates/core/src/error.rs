use thiserror::Error;

/// Failure modes of the exact-arithmetic kernels.
#[derive(Debug, Error)]
pub enum Error {
    /// A quantity needed more p-adic digits than the ring carries.
    #[error("precision exhausted: {0}")]
    Precision(String),

    /// A bounded deterministic search ran out of candidates; signals the
    /// bound, not nonexistence.
    #[error("search exhausted at bound {bound}: {context}")]
    SearchExhausted { bound: usize, context: String },

    /// A constructor's structural invariant failed; indicates a bug or
    /// corrupted input data, not a routine error path.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// Independent random trials produced certificates that cannot all hold.
    #[error("inconsistent trials: {0}")]
    Inconsistency(String),

    /// Windowed slope estimates did not agree.
    #[error("non-stabilization: {0}")]
    NonStabilization(String),

    #[error("rank mismatch: {0}")]
    RankMismatch(String),

    #[error("flag quotient lengths {found:?}, expected {expected:?}")]
    FlagLength { found: (u64, u64), expected: (u64, u64) },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("degenerate form: {0}")]
    DegenerateForm(String),

    #[error("incompatible action: {0}")]
    ActionIncompatible(String),

    #[error("non-integral result: {0}")]
    NonIntegral(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
