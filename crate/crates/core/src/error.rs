use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("regime error: {0}")]
    Regime(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("tolerance not met for {what}: achieved {achieved:e}, requested {requested:e}")]
    Tolerance {
        what: String,
        achieved: f64,
        requested: f64,
    },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }
}
