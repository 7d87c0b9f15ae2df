use thiserror::Error;

/// Errors raised by the simulation engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid detector port {0} (expected 1..=4)")]
    InvalidPort(u8),

    #[error("tally contains no coincidences")]
    EmptyTally,

    #[error("all four coincidence rates are zero; correlation is undefined")]
    ZeroDenominator,

    #[error("coincidence counter overflow")]
    CountOverflow,

    #[error("empty grid")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, Error>;
