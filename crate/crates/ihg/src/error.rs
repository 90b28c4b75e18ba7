//! Error types shared across the crate.

use std::fmt;

/// Errors raised by evaluation, classification and verification routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// log-gamma (or a gamma ratio) was requested at a nonpositive integer.
    Pole(String),
    /// 0^alpha with Re alpha <= 0.
    ZeroBase,
    /// A quantity that must stay off a branch boundary (Im = 0 locus) is on it.
    Boundary(String),
    /// Endpoints violate 0 <= a < b, or an endpoint limit is not defined.
    Endpoint(String),
    /// One of gamma, gamma+alpha1, gamma+alpha2, gamma+alpha1+alpha2 is too
    /// close to an integer for the series theory to apply.
    NonGenericParameters(String),
    /// The evaluation point violates the convergence-region margin.
    OutsideConvergenceRegion(String),
    /// The series truncation cap was reached before the tail bound met `tol`.
    NotConverged { tail_bound: f64, terms: usize },
    /// A t-branch point lies on (or too close to) the integration contour.
    BranchPointOnContour(String),
    /// Adaptive quadrature failed to reach the requested accuracy.
    QuadratureNotConverged { estimate: f64 },
    /// A moving branch point would cross the deformed contour.
    ContourCollision(String),
    /// The columns of the matrix A do not span Z^d.
    Rank(String),
    /// A toric pair (u, v) does not satisfy A u = A v.
    ToricMismatch(String),
    /// Unknown contiguity shift tag.
    UnknownShift(String),
    /// Derivative multi-index order above the supported maximum.
    DerivativeOrderTooHigh(u32),
    /// A Cauchy differentiation circle hit a singularity or failed to settle.
    NumericBreakdown(String),
    /// No admissible evaluation point for a connection check.
    EmptyOverlap(String),
    /// Malformed configuration input.
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Pole(s) => write!(f, "pole: {s}"),
            Error::ZeroBase => write!(f, "zero base with nonpositive real exponent"),
            Error::Boundary(s) => write!(f, "branch boundary: {s}"),
            Error::Endpoint(s) => write!(f, "endpoint: {s}"),
            Error::NonGenericParameters(s) => write!(f, "non-generic parameters: {s}"),
            Error::OutsideConvergenceRegion(s) => write!(f, "outside convergence region: {s}"),
            Error::NotConverged { tail_bound, terms } => {
                write!(f, "series not converged: tail bound {tail_bound:.3e} after {terms} terms")
            }
            Error::BranchPointOnContour(s) => write!(f, "branch point on contour: {s}"),
            Error::QuadratureNotConverged { estimate } => {
                write!(f, "quadrature not converged: error estimate {estimate:.3e}")
            }
            Error::ContourCollision(s) => write!(f, "contour collision: {s}"),
            Error::Rank(s) => write!(f, "rank: {s}"),
            Error::ToricMismatch(s) => write!(f, "toric mismatch: {s}"),
            Error::UnknownShift(s) => write!(f, "unknown shift: {s}"),
            Error::DerivativeOrderTooHigh(n) => write!(f, "derivative order {n} exceeds maximum 4"),
            Error::NumericBreakdown(s) => write!(f, "numeric breakdown: {s}"),
            Error::EmptyOverlap(s) => write!(f, "empty overlap: {s}"),
            Error::Config(s) => write!(f, "config: {s}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
