use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// Inputs have inconsistent or insufficient dimensions.
    #[error("input shape error: {0}")]
    InputShape(String),

    /// A parameter or derived value lies outside the domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// The matrix is singular or too ill-conditioned for its inverse to be trusted.
    #[error("matrix is near-singular (reciprocal condition {rcond:.3e}); assets may be redundant")]
    NearSingular { rcond: f64 },

    /// Some outcome with positive probability wipes out the whole wealth.
    #[error("bankruptcy: outcome {outcome} gives wealth factor {wealth:.6e}")]
    Bankruptcy { outcome: usize, wealth: f64 },

    #[error("exact enumeration supports at most {limit} assets, got {requested}")]
    EnumerationLimit { requested: usize, limit: usize },

    #[error("target total fraction {target:.10} lies outside the interpolation range; nearest bound is m = {nearest_m} (total fraction {nearest_value:.10})")]
    Extrapolation {
        target: f64,
        nearest_m: usize,
        nearest_value: f64,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::NearSingular { .. }
                | Error::Bankruptcy { .. }
                | Error::EnumerationLimit { .. }
                | Error::Extrapolation { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
