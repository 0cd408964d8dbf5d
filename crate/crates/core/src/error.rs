use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpencerError {
    #[error("invalid algebra label {0:?} (expected e.g. A1, B3, E7)")]
    InvalidLabel(String),

    #[error("invalid Cartan matrix: {0}")]
    InvalidCartan(String),

    #[error("structure constant failure: {0}")]
    Construction(String),

    #[error("elements belong to different algebras")]
    AlgebraMismatch,

    #[error("expected degree {expected}, got degree {found}")]
    DegreeMismatch { expected: usize, found: usize },

    #[error("resource cap exceeded: {what} has dimension {dim} > cap {cap}")]
    ResourceCap { what: String, dim: u128, cap: u128 },

    #[error("modular ranks disagree after retries: {0}")]
    RankDisagreement(String),

    #[error("weight is not dominant: {0:?}")]
    NotDominant(Vec<i64>),

    #[error("character is not a genuine module character: {0}")]
    BadCharacter(String),

    #[error("no minimal representation table entry for {0}")]
    UnknownFamily(String),

    #[error("cochain is not closed")]
    NotClosed,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("solver diverged at iteration {iteration}: energy {energy}")]
    Diverged { iteration: usize, energy: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SpencerError>;
