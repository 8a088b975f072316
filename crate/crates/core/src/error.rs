use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hermite order {order} exceeds the supported maximum {max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("correlation {0} is outside [-1, 1]")]
    RhoOutOfRange(f64),

    #[error("Hermite coefficient of degree {degree} is zero")]
    ZeroCoefficient { degree: usize },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("input is not on the unit sphere (norm {norm})")]
    NotUnitNorm { norm: f64 },

    #[error("empty batch")]
    EmptyBatch,

    #[error("label {0} is not in {{-1, +1}}")]
    InvalidLabel(f64),

    #[error("training diverged at step {step}: loss is not finite (reduce the learning rate)")]
    Diverged { step: usize },

    #[error("numeric overflow at B = {b}: reduce the initialization scale")]
    Overflow { b: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("unknown dataset kind `{0}`")]
    UnknownKind(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
