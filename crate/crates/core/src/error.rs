use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("measure is not refinable: atom of mass {mass} at {location}")]
    NotRefinable { location: f64, mass: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("set {0} lies outside the basis domain")]
    Domain(String),

    #[error("adaptedness violation: integrand on cell {cell} read field value of cell {read}")]
    Adaptedness { cell: usize, read: usize },

    #[error("degenerate step: r({dt}) = 0 for a positive time step")]
    DegenerateStep { dt: f64 },

    #[error("spectral error: {0}")]
    Spectral(String),

    #[error("unsupported measure: {0}")]
    UnsupportedMeasure(String),

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of a numerical routine (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature(_)
                | Error::Divergent(_)
                | Error::Spectral(_)
                | Error::DegenerateStep { .. }
                | Error::NotRefinable { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
