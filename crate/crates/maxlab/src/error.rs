use thiserror::Error;

/// Unified error type for the laboratory.
///
/// Every fallible operation in the crate returns [`Result`]. Variants are
/// grouped by what went wrong rather than where: geometry problems
/// ([`Error::InvalidRegion`], [`Error::InvalidBody`]), parameter problems
/// ([`Error::InvalidExponent`], [`Error::InvalidParameter`]), structural
/// mismatches ([`Error::DimensionMismatch`], [`Error::Alignment`],
/// [`Error::Inconsistent`]), and I/O or parse failures.
#[derive(Debug, Error)]
pub enum Error {
    /// A box has `lo > hi` on some axis, or a region escapes its container.
    #[error("invalid region: {0}")]
    InvalidRegion(String),

    /// A body specification is unusable (nonpositive size, bad kind).
    #[error("invalid body: {0}")]
    InvalidBody(String),

    /// An L^p exponent outside the admissible range (p > 1, finite).
    #[error("invalid exponent p = {0}; require finite p > 1")]
    InvalidExponent(f64),

    /// A scalar parameter (lambda, ratio, temperature, ...) out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A refinement level or scale index out of range.
    #[error("invalid level: {0}")]
    InvalidLevel(String),

    /// Grids, points, or bodies of different dimensions were mixed.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A region is not aligned with the grid cells as required.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Inputs that must agree with each other do not.
    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    /// Input is degenerate for the requested computation (e.g. f == 0 a.e.).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A configuration cannot be executed (missing stop rule, empty ladder, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// The perturbation budget of the almost-centered bound is exhausted:
    /// the requested epsilon leaves no positive gain.
    #[error("epsilon too large: {0}")]
    EpsilonTooLarge(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file or string could not be parsed (grid files, JSON reports).
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

/// Validates an L^p exponent. Almost every formula in the crate divides by
/// `p - 1` or raises to `1/p`, so `p` must be finite and strictly above 1.
pub fn check_exponent(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    Ok(())
}
