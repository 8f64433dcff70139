use thiserror::Error;

#[derive(Debug, Error)]
pub enum PikanError {
    #[error("division by zero at tape node {node}")]
    DivisionByZero { node: u32 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("sample point ({x}, {y}) belongs to no material region")]
    UnknownRegion { x: f64, y: f64 },

    #[error("optimizer diverged after {steps} steps (|theta| = {theta_norm:.6e}): {reason}")]
    NonFinite {
        steps: usize,
        theta_norm: f64,
        reason: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error("unknown builtin problem '{0}'")]
    UnknownProblem(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PikanError>;
