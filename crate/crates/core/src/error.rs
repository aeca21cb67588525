use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular block {block}: I + Z0*Y is not invertible")]
    Singular { block: usize },
    #[error("dictionary column {0} has zero norm")]
    ZeroColumn(usize),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("resource guard: {0}")]
    Budget(String),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Dimension(_) => "dimension",
            Error::Singular { .. } => "singular",
            Error::ZeroColumn(_) => "zero_column",
            Error::Degenerate(_) => "degenerate",
            Error::Budget(_) => "budget",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }

    /// Stable numeric code; zero is reserved for success.
    pub fn code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Dimension(_) => 3,
            Error::Singular { .. } => 4,
            Error::ZeroColumn(_) => 5,
            Error::Degenerate(_) => 6,
            Error::Budget(_) => 7,
            Error::Parse(_) => 8,
            Error::Io(_) => 9,
            Error::Csv(_) => 10,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Dimension(msg()))
    }
}
