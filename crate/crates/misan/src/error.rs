//! Library-wide error type.

use crate::rates::ValueSet;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("value {value} outside the value set {set:?}")]
    ValueOutsideX { value: i64, set: ValueSet },

    #[error("invalid rate input: {0}")]
    InvalidInput(String),

    #[error("operation requires a two-species table")]
    NotTwoSpecies,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation setup: {0}")]
    Simulation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
