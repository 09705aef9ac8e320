//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by laboratory operations.
///
/// Preconditions that fail numerically (near-singular input, degenerate
/// spectral gaps, insufficient data) are reported through dedicated variants
/// so callers can distinguish a bad configuration from a genuine computation
/// failure.
#[derive(Error, Debug)]
pub enum Error {
    /// Matrix input is not square or has non-finite entries.
    #[error("invalid matrix input: {0}")]
    InvalidMatrix(String),

    /// Determinant is non-positive, non-finite, or too far from one to admit
    /// unit-determinant renormalization.
    #[error("matrix is not renormalizable to determinant one (det = {det:.6e})")]
    NotUnimodular { det: f64 },

    /// Singular values overflow or underflow the representable range.
    #[error("singular values out of range: {0}")]
    SingularOverflow(String),

    /// A vector that must sum to zero does not.
    #[error("entries do not sum to zero (sum = {sum:.6e})")]
    NotSumZero { sum: f64 },

    /// A root-index set is empty or out of range for the ambient dimension.
    #[error("invalid root index set: {0}")]
    InvalidTheta(String),

    /// A frame expected to be orthogonal fails the orthogonality tolerance.
    #[error("degenerate frame: deviation from orthogonality {deviation:.3e}")]
    DegenerateFrame { deviation: f64 },

    /// Singular-value gaps required for an attractor flag are missing.
    #[error("degenerate attractor: relative gap {gap:.3e} at root index {index}")]
    DegenerateAttractor { index: usize, gap: f64 },

    /// The two flags do not have matching (theta, iota(theta)) signatures.
    #[error("flag signature mismatch: {0}")]
    SignatureMismatch(String),

    /// A generator set contains the identity or an invalid matrix.
    #[error("invalid generator set: {0}")]
    InvalidGenerators(String),

    /// Enumeration exceeded its element budget; the partial ball is attached.
    #[error("orbit ball exceeded budget of {budget} elements at length {reached}")]
    BallBudgetExceeded {
        budget: usize,
        reached: usize,
        partial: Box<crate::orbit::OrbitBall>,
    },

    /// Not enough data to fit or report the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The linear form takes significantly negative values on the orbit,
    /// so exponent machinery built on decay does not apply.
    #[error("form is not proper on the orbit: {count} elements with value < -{tol:.1e}; worst = {worst:.6e}")]
    PropernessViolation { count: usize, worst: f64, tol: f64 },

    /// A partial sum or weight overflowed.
    #[error("series evaluation overflowed at s = {s:.6e}")]
    SeriesOverflow { s: f64 },

    /// Every candidate atom was degenerate, leaving an empty measure.
    #[error("empty measure: all {skipped} orbit elements had degenerate attractors")]
    EmptyMeasure { skipped: usize },

    /// Shadows at this radius capture no mass; a larger radius is suggested.
    #[error("all shadows at radius {radius} carry zero mass; retry with radius >= {suggested}")]
    RadiusTooSmall { radius: f64, suggested: f64 },

    /// The flag pair is too close to incident for stable basis assembly.
    #[error("ill-conditioned flag pair: general-position margin {margin:.3e} below {min_margin:.3e}")]
    IllConditionedPair { margin: f64, min_margin: f64 },

    /// The shadow minimization failed to converge; best value attached.
    #[error("shadow minimization did not converge: best value {best:.6e}")]
    OptimizerFailure { best: f64 },

    /// Closed-form and brute-force optimization disagree.
    #[error("bound verification failed: closed form {closed:.12e} vs search {search:.12e}")]
    BoundMismatch { closed: f64, search: f64 },

    /// Operation is limited to low-dimensional faces and got a higher one.
    #[error("unsupported face dimension {dim} for {op}; supported: <= {max}")]
    UnsupportedDimension { op: &'static str, dim: usize, max: usize },

    /// Input is outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Fixture file could not be read or parsed.
    #[error("fixture error: {0}")]
    Fixture(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
