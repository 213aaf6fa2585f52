use thiserror::Error;

/// Errors raised by the workbench library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown generator symbol `{0}`")]
    UnknownSymbol(String),

    #[error("invalid generating set: {0}")]
    InvalidGenerators(String),

    #[error("resource cap exceeded: {what} would need {needed} > cap {cap}")]
    CapExceeded {
        what: &'static str,
        needed: usize,
        cap: usize,
    },

    #[error("incompatible tower element at level {level}: {detail}")]
    IncompatibleTower { level: usize, detail: String },

    #[error("invalid tower: {0}")]
    InvalidTower(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("warped graph is disconnected: {components} components (first nodes {witness:?})")]
    Disconnected { components: usize, witness: Vec<usize> },

    #[error("orbit labels collide: points {first} and {second} share label {label}")]
    LabelCollision { first: usize, second: usize, label: String },

    #[error("level below t_R: {0}")]
    LevelBelowThreshold(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("property violated: {0}")]
    PropertyViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
