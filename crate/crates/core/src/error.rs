use thiserror::Error;

/// Errors produced by the engine, the attack builders, and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    /// An interaction was requested that the interaction model does not admit
    /// (e.g. an omissive flavor under a non-omissive preset in a strict context).
    #[error("model violation: {0}")]
    ModelViolation(String),

    /// A program callback returned a state outside its declared state space.
    #[error("program fault: {0}")]
    ProgramFault(String),

    /// A scheduler or adversary script is malformed for the requested run.
    #[error("invalid script: {0}")]
    Script(String),

    /// A run configuration (file or in-memory) is inconsistent or unresolvable.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An attack construction could not be completed.
    #[error("attack construction failed: {0}")]
    Attack(String),

    /// A verification operation was invoked on unsuitable input.
    #[error("verification error: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
