use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("zero vector must sum to {expected}, got deviation {deviation:.3e}")]
    BadZeroSum { expected: String, deviation: f64 },
    #[error("shift steps differ: {0} vs {1}")]
    StepMismatch(String, String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("contour sample hit a flagged (near-pole) value")]
    ContourHitsPole,
    #[error("evaluation matrix contains flagged values")]
    DegenerateSamples,
    #[error("eta too close to a half-lattice or low-order rational lattice point")]
    DegenerateEta,
    #[error("pole separation too small for the probe radius")]
    PoleCollision,
    #[error("constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("additive constant diverges: R_delta(ia) is numerically zero")]
    CasimirDivergence,
    #[error("xi hits a zero of the additive-term denominator")]
    BadXi,
    #[error("operator multiplier does not match the module context")]
    MultiplierMismatch,
    #[error("least-squares fit residual {0:.3e} exceeds the invariance threshold")]
    FitFailure(f64),
    #[error("kernel sections remained rank-deficient after retries")]
    BasisDegenerate,
    #[error("singular-value gap too small to decide the rank")]
    RankAmbiguous,
    #[error("unknown check: {0}")]
    UnknownCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;
