use thiserror::Error;

/// Errors surfaced by the analysis and solver layers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("zero frequency excluded")]
    ZeroFrequency,

    #[error("frequency outside the cone {0}")]
    OutsideCone(String),

    #[error("degenerate eigenframe: {0}")]
    DegenerateFrame(String),

    #[error("classification failed: {0}")]
    Classification(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("divergent series: gamma = {gamma} is at or below the threshold gamma0 = {gamma0}")]
    DivergentSeries { gamma: f64, gamma0: f64 },

    #[error("bounded expansion exceeded: {0}")]
    BoundedExpansion(String),

    #[error("small divisor below floor at mode ({0}, {1}): |det L| = {2:.3e}")]
    SmallDivisor(i64, i64, f64),

    #[error("mode table violation: order {order} populated mode {mode:?} is not permitted")]
    ModeTable { order: i32, mode: (i64, i64, i64) },

    #[error("structural degeneracy: {0}")]
    Degeneracy(String),

    #[error("resolution guard: {0}")]
    Resolution(String),

    #[error("domain-of-dependence violated: {0}")]
    DomainOfDependence(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
