use thiserror::Error;

/// Broad failure class, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or unreadable input.
    Input,
    /// The requested estimate is outside the regime where the method applies.
    NumericalRegime,
    /// Something that should not happen on valid input.
    Internal,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("model has no factors")]
    EmptyModel,
    #[error("sigma[{index}] = {value} is not positive")]
    NonPositiveSigma { index: usize, value: f64 },
    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("parameter {name}[{index}] is not finite")]
    NonFiniteParameter { name: &'static str, index: usize },
    #[error("malformed model file: {0}")]
    Parse(String),
    #[error("n = {n} is too large for pattern enumeration (limit {limit})")]
    NTooLargeForEnumeration { n: usize, limit: usize },
    #[error("n = {n} is too large for recursive quadrature (limit {limit})")]
    NTooLargeForQuadrature { n: usize, limit: usize },
    #[error("n = {n} is too small: {reason}")]
    NTooSmall { n: usize, reason: &'static str },
    #[error("all means are zero; the nonzero-mean asymptotic does not apply")]
    AllMeansZero,
    #[error("no boundary saddle for pattern {pattern} at x = {x}: x does not exceed g(0+) = {floor}")]
    NoSaddleInRegion { pattern: String, x: f64, floor: f64 },
    #[error("saddle root solve did not reach tolerance {tol} within {iterations} iterations")]
    ToleranceNotReached { tol: f64, iterations: usize },
    #[error("saddle coordinate u[{index}] is zero")]
    DegenerateCoordinate { index: usize },
    #[error("Hessian is not positive definite for pattern {pattern} at x = {x}")]
    HessianNotPd { pattern: String, x: f64 },
    #[error("unbalanced bound not valid: b_x = {b_x} < max|mu| = {max_abs_mu}")]
    BoundNotValid { b_x: f64, max_abs_mu: f64 },
    #[error("quadrature reached relative accuracy {achieved:e}, wanted {wanted:e}")]
    AccuracyNotReached { achieved: f64, wanted: f64 },
    #[error("importance sampling proposal unavailable: {0}")]
    SaddleUnavailable(String),
    #[error("no sample crossed x after {n_samples} draws; p < {upper_bound:e} (95% one-sided)")]
    DegenerateVariance { n_samples: u64, upper_bound: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::EmptyModel => "empty-model",
            Error::NonPositiveSigma { .. } => "non-positive-sigma",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::NonFiniteParameter { .. } => "non-finite-parameter",
            Error::Parse(_) => "parse-error",
            Error::NTooLargeForEnumeration { .. } => "n-too-large-for-enumeration",
            Error::NTooLargeForQuadrature { .. } => "n-too-large-for-quadrature",
            Error::NTooSmall { .. } => "n-too-small",
            Error::AllMeansZero => "all-means-zero",
            Error::NoSaddleInRegion { .. } => "no-saddle-in-region",
            Error::ToleranceNotReached { .. } => "tolerance-not-reached",
            Error::DegenerateCoordinate { .. } => "degenerate-coordinate",
            Error::HessianNotPd { .. } => "hessian-not-pd",
            Error::BoundNotValid { .. } => "bound-not-valid",
            Error::AccuracyNotReached { .. } => "accuracy-not-reached",
            Error::SaddleUnavailable(_) => "saddle-unavailable",
            Error::DegenerateVariance { .. } => "degenerate-variance",
            Error::InvalidArgument(_) => "invalid-argument",
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::EmptyModel
            | Error::NonPositiveSigma { .. }
            | Error::LengthMismatch { .. }
            | Error::NonFiniteParameter { .. }
            | Error::Parse(_)
            | Error::NTooLargeForEnumeration { .. }
            | Error::NTooLargeForQuadrature { .. }
            | Error::NTooSmall { .. }
            | Error::AllMeansZero
            | Error::InvalidArgument(_) => ErrorKind::Input,
            Error::NoSaddleInRegion { .. }
            | Error::ToleranceNotReached { .. }
            | Error::HessianNotPd { .. }
            | Error::BoundNotValid { .. }
            | Error::AccuracyNotReached { .. }
            | Error::SaddleUnavailable(_)
            | Error::DegenerateVariance { .. } => ErrorKind::NumericalRegime,
            Error::DegenerateCoordinate { .. } => ErrorKind::Internal,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
