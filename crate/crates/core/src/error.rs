use thiserror::Error;

/// Which defining property of an f-structure point failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    Skew,
    Cubic,
    Rank,
}

impl std::fmt::Display for Invariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Invariant::Skew => f.write_str("F + F^T = 0"),
            Invariant::Cubic => f.write_str("F^3 + F = 0"),
            Invariant::Rank => f.write_str("rank(F) = 2n"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("metric not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("degenerate span")]
    DegenerateSpan,

    #[error("not an f-structure of rank {expected}: numerical rank is {found}")]
    RankMismatch { expected: usize, found: usize },

    #[error("invariant `{invariant}` violated: residual {residual:e}")]
    InvalidPoint { invariant: Invariant, residual: f64 },

    #[error("non-orthogonal complex structure (residual {0:e})")]
    NonOrthogonalComplexStructure(f64),

    #[error("not an orthogonal projection (residual {0:e})")]
    NotProjection(f64),

    #[error("rank parameter n = {n} out of range for m = {m} (need 1 <= n <= m/2)")]
    RankOutOfRange { m: usize, n: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain margin too small")]
    DomainMargin,

    #[error("tangent vector not in the image of ad(F) (residual {0:e})")]
    NotTangent(f64),

    #[error("non-surjective quotient map")]
    NotSurjective,

    #[error("not a submersion here")]
    NotSubmersion,

    #[error("pullback quotient is not isotropic (PHWC residual {0:e})")]
    NotPhwc(f64),

    #[error("fibres not affine here (drift {0:e})")]
    FibresNotAffine(f64),

    #[error("leaf ambiguous or domain too large")]
    NoConvergence,

    #[error("retraction onto fibre failed")]
    RetractionFailed,

    #[error("section component {0} vanishes; quotient-form equation is singular here")]
    VanishingSectionComponent(usize),

    #[error("check `{check}` failed: residual {residual:e} exceeds {tol:e}")]
    CheckFailed {
        check: String,
        residual: f64,
        tol: f64,
    },

    #[error("scenario error: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
