use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid price set: {0}")]
    InvalidPriceSet(String),

    #[error("{what} = {value} outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid price range [{r_min}, {r_max}]")]
    InvalidRange { r_min: f64, r_max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("solver limit: {0}")]
    SolverLimit(String),

    #[error("unknown customer type {0}")]
    UnknownType(usize),

    #[error("row {row}: {msg}")]
    Schema { row: usize, msg: String },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by a solver hitting an iteration or size guard
    /// rather than by bad input.
    pub fn is_solver_limit(&self) -> bool {
        matches!(self, Error::SolverLimit(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidArgument(format!("json: {e}"))
    }
}
