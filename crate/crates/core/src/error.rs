use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("word materialization of {0} letters exceeds the budget")]
    Budget(u128),
    #[error("matrix has a nonpositive entry")]
    NonPositive,
    #[error("permutation is reducible")]
    Reducible,
    #[error("degenerate tie at induction step {step}")]
    Tie { step: usize },
    #[error("floor {floor} of tower {tower} straddles a discontinuity")]
    Straddle { tower: usize, floor: usize },
    #[error("search budget exceeded: {0}")]
    SearchBudget(String),
    #[error("no strictly positive block within depth {0}")]
    NoPositiveBlock(usize),
    #[error("path prefix is maximal at every level")]
    AllMaximal,
    #[error("inconsistent grouping: {0}")]
    Grouping(String),
    #[error("precision budget exceeded: {0}")]
    Precision(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("top exponents not separated: gap {gap} vs 5*stderr {threshold}")]
    GapTest { gap: f64, threshold: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("sequence is not in canonical form")]
    NotCanonical,
    #[error("no independent family of good return words up to length {0}")]
    NoReturnBasis(usize),
    #[error("value out of range: {0}")]
    OutOfRange(String),
}

impl Error {
    /// Numerical degeneracies, as opposed to bad input or missing data.
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::Tie { .. }
                | Error::Straddle { .. }
                | Error::Precision(_)
                | Error::Singular(_)
                | Error::NoPositiveBlock(_)
                | Error::GapTest { .. }
                | Error::Budget(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
