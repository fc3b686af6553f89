use thiserror::Error;

/// Errors raised by the simulation, numerics and harness layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate law {law}: operation requires Var xi > 0")]
    DegenerateLaw { law: String },

    #[error("unsupported query for law {law}: {what}")]
    UnsupportedQuery { law: String, what: String },

    #[error("population cap of {cap} exceeded in generation {generation}")]
    PopulationCap { cap: u64, generation: usize },

    #[error("time {t} lies outside the simulated horizon {horizon}")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("time {t} lies outside the table range [0, {t_max}]")]
    TableRange { t: f64, t_max: f64 },

    #[error("table error: {0}")]
    Table(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("config error ({location}): {msg}")]
    Config { location: String, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Table(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
