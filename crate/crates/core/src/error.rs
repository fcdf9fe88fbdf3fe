use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
///
/// The CLI maps variants to process exit codes: configuration problems exit
/// with 2, guardrail breaches with 3, and empty-equilibrium refusals with 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent configuration (bad tables, bad parameters,
    /// mismatched observation spaces).
    #[error("configuration error: {0}")]
    Config(String),

    /// A desk-scale size guardrail was exceeded.
    #[error("guardrail exceeded: {0}")]
    Guardrail(String),

    /// An operation that requires a nonempty subjective equilibrium set was
    /// invoked on a quantized set containing none.
    #[error("empty subjective equilibrium set: {0}")]
    EmptyEquilibrium(String),

    /// A structural hypothesis of the requested operation does not hold
    /// (reducible/periodic chain, asymmetric co-players on the mean-field
    /// channel, non-soft joint policy, unsupported channel).
    #[error("structural error: {0}")]
    Structural(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("toml parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn guardrail(msg: impl Into<String>) -> Self {
        Error::Guardrail(msg.into())
    }

    pub fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    /// Exit code the CLI reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Toml(_) => 2,
            Error::Guardrail(_) => 3,
            Error::EmptyEquilibrium(_) => 4,
            _ => 1,
        }
    }
}
