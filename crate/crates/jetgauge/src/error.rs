use thiserror::Error;

use crate::lie::GroupKind;

/// Errors raised by the jet and groupoid machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("division by near-zero value {0:e}")]
    DivisionNearZero(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("group mismatch: {0:?} vs {1:?}")]
    GroupMismatch(GroupKind, GroupKind),

    #[error("matrix is singular (|det| = {0:e})")]
    SingularMatrix(f64),

    #[error("matrix is not an element of {kind:?} (residual {residual:e})")]
    NotInGroup { kind: GroupKind, residual: f64 },

    #[error("matrix is not in the Lie algebra (residual {0:e})")]
    NotInAlgebra(f64),

    #[error("points lie in different fibers (base distance {0:e})")]
    FiberMismatch(f64),

    #[error("elements are not composable (base distance {0:e})")]
    Composability(f64),

    #[error("bisection is degenerate at the evaluation point (|det| = {0:e})")]
    DegenerateBisection(f64),

    #[error("second-order jet is not semiholonomous (defect {0:e})")]
    NotSemiholonomous(f64),

    #[error("base points differ (distance {0:e})")]
    BasePointMismatch(f64),

    #[error("underlying first-order jets differ (distance {0:e})")]
    FirstJetMismatch(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("suite `{0}` needs a convention ledger; run pin_conventions first")]
    ConventionUnpinned(String),

    #[error("convention pinning failed: {0}")]
    ConventionPinning(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
