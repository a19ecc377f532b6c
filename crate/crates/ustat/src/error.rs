use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Naive enumeration (or an exact expectation) would exceed its budget.
    #[error("budget exceeded: {needed} {unit} needed, budget is {budget}")]
    BudgetExceeded {
        needed: u128,
        budget: u128,
        unit: &'static str,
    },

    /// Order-based kernels require pairwise distinct real inputs.
    #[error("tied values in real-valued input at positions {0} and {1}")]
    TieError(usize, usize),

    /// Kernel and observations disagree on the alphabet.
    #[error("alphabet mismatch: kernel expects {expected} symbols, sequence uses symbol {found}")]
    AlphabetMismatch { expected: usize, found: usize },

    /// Kernel arity and input length disagree.
    #[error("arity mismatch: kernel has arity {arity}, got {got} arguments")]
    ArityMismatch { arity: usize, got: usize },

    /// Window must exceed the total finite gap sum for the block reduction.
    #[error("window too small: need window > {gap_sum}, got {window}")]
    WindowTooSmall { window: usize, gap_sum: usize },

    /// Lifting needs at least one full window.
    #[error("sequence too short: length {n} < window {window}")]
    SequenceTooShort { n: usize, window: usize },

    /// Integer accumulator overflowed and arbitrary precision was not enabled.
    #[error("exact integer accumulator overflowed; enable the big-integer option")]
    Overflow,

    /// A normal comparison was requested for a statistic with zero asymptotic variance.
    #[error("degenerate target: asymptotic variance is {0}; use the degenerate diagnostics instead")]
    DegenerateTarget(f64),

    /// Renewal stopping requires a declared positive drift.
    #[error("nonpositive drift: E h(X_1) = {0} must be > 0")]
    NonpositiveDrift(f64),

    /// Conditioned renewal sampling cannot hit the conditioning event.
    #[error("conditioning impossible or too rare: acceptance rate {rate:.3e} after {attempts} attempts")]
    ConditioningImpossible { rate: f64, attempts: u64 },

    /// A variance came out more negative than floating-point slack allows.
    #[error("variance {0} below the negative tolerance; this indicates a bug, not roundoff")]
    NegativeVariance(f64),

    /// Configuration or input validation failure.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
