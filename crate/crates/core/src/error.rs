use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid or inconsistent configuration, including unreadable input files.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input outside an operation's domain (e.g. Θ at the origin).
    #[error("domain error: {0}")]
    Domain(String),
    /// The simulation reached a state the model cannot handle.
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
