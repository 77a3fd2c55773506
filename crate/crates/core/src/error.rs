use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Conditioning on an event that has zero probability.
    #[error("undefined conditioning: {0}")]
    UndefinedConditioning(String),

    /// Visibility requested when the out-of-dip coincidence probability is zero.
    #[error("undefined visibility: coincidence probability outside the dip is zero")]
    UndefinedVisibility,

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::UndefinedConditioning(_) => "undefined-conditioning",
            Error::UndefinedVisibility => "undefined-visibility",
            Error::Calibration(_) => "calibration",
            Error::Configuration(_) => "configuration",
            Error::FitFailure(_) => "fit-failure",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }

    /// The description without the class prefix of `Display`.
    pub fn message(&self) -> String {
        match self {
            Error::Domain(m)
            | Error::UndefinedConditioning(m)
            | Error::Calibration(m)
            | Error::Configuration(m)
            | Error::FitFailure(m)
            | Error::Parse(m) => m.clone(),
            Error::UndefinedVisibility => "coincidence probability outside the dip is zero".into(),
            Error::Io(e) => e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
