use thiserror::Error;

/// Errors raised by the library. Numerical infeasibility (an unlearnable class,
/// an infinite divergence) is reported through values, not through this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error(
        "reference model violates its KL radius: model {model}, decision {decision}, \
         divergence {divergence} > c_kl {c_kl}"
    )]
    ReferenceViolation {
        model: usize,
        decision: usize,
        divergence: f64,
        c_kl: f64,
    },

    #[error(
        "Lipschitz constant {stored} violated by models ({a}, {b}) at decision {decision}: \
         needs at least {needed}"
    )]
    LipschitzViolation {
        a: usize,
        b: usize,
        decision: usize,
        stored: f64,
        needed: f64,
    },

    #[error("policy space of size {count} exceeds the cap {cap}")]
    PolicyCap { count: u128, cap: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("algorithm emitted decision {decision} at round {round}, only {n} decisions exist")]
    DecisionOutOfRange { round: usize, decision: usize, n: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
