use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Core(#[from] spacemac::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("topology generation failed: {0}")]
    TopologyGen(String),
    #[error("attacker placement infeasible: {0}")]
    Placement(String),
    #[error("cannot parse {what}: {message}")]
    Parse { what: &'static str, message: String },
}

pub type Result<T> = std::result::Result<T, SimError>;
