use thiserror::Error;

/// Failures raised by the geometric and measure-theoretic routines.
///
/// Verification checks never return these for a failed property; failures
/// of that kind are recorded in a [`crate::record::VerificationRecord`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("inverse-divergence: Newton inverse did not converge at ({x1}, {x2})")]
    InverseDivergence { x1: f64, x2: f64 },
    #[error("not-uniformly-hyperbolic: {0}")]
    NotUniformlyHyperbolic(String),
    #[error("bracket-undefined: d(x,y) = {distance} exceeds {eps}")]
    BracketUndefined { distance: f64, eps: f64 },
    #[error("bracket-divergence: {0}")]
    BracketDivergence(String),
    #[error("constants-audit-failed: {0}")]
    ConstantsAuditFailed(String),
    #[error("rectangle-too-large: r = {r} must be below {limit}")]
    RectangleTooLarge { r: f64, limit: f64 },
    #[error("not-in-rectangle")]
    NotInRectangle,
    #[error("not-on-leaf: offset {offset:e} from the leaf")]
    NotOnLeaf { offset: f64 },
    #[error("hypothesis-unsatisfied: {0}")]
    HypothesisUnsatisfied(String),
    #[error("separated-set-audit-failed: {0}")]
    SeparatedSetAuditFailed(String),
    #[error("continuation-failure at periodic point {index}: residual {residual:e}")]
    ContinuationFailure { index: usize, residual: f64 },
    #[error("empty-rectangle: the measure gives the rectangle zero mass")]
    EmptyRectangle,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
