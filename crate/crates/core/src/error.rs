use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A named layout, algorithm or start/goal id was not recognised, or a
    /// configuration field is missing or out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates an operation's precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// An option could not be built from the given ingredients.
    #[error("option construction failed: {0}")]
    Construction(String),

    /// A numerical routine failed to reach its accuracy target.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Text input (layout map, option file, CSV) could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A plot could not be drawn or encoded.
    #[error("plot error: {0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
