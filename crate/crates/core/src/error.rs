use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("value {value} outside label range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },
    #[error("invalid label set: {0}")]
    Labels(String),
    #[error("invalid data-term model: {0}")]
    Model(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("bregman iteration aborted at step {step}: {fraction:.3} of pixels are not sublabel-integral")]
    NonIntegral { step: usize, fraction: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
