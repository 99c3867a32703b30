use thiserror::Error;

/// Errors raised by the library. Every variant carries a human-readable
/// message; [`Error::kind`] gives a stable machine-readable tag.
#[derive(Debug, Error)]
pub enum Error {
    #[error("inadmissible parameter: {0}")]
    InadmissibleParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("value outside the range of the function: {0}")]
    Range(String),
    #[error("not invertible: {0}")]
    NonInvertible(String),
    #[error("not differentiable: {0}")]
    NotDifferentiable(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("finite-difference step too small: {0}")]
    StepTooSmall(String),
    #[error("generator is not strict: {0}")]
    NotStrict(String),
    #[error("conditioning event has zero mass: {0}")]
    ZeroMass(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("integration failed: {0}")]
    IntegrationFailure(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("no interior maximum: {0}")]
    NoInteriorMaximum(String),
    #[error("Kendall's tau out of range: {0}")]
    OutOfRangeTau(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InadmissibleParameter(_) => "InadmissibleParameter",
            Error::Domain(_) => "DomainError",
            Error::Range(_) => "RangeError",
            Error::NonInvertible(_) => "NonInvertible",
            Error::NotDifferentiable(_) => "NotDifferentiable",
            Error::InvalidBox(_) => "InvalidBox",
            Error::StepTooSmall(_) => "StepTooSmall",
            Error::NotStrict(_) => "NotStrict",
            Error::ZeroMass(_) => "ZeroMass",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::IntegrationFailure(_) => "IntegrationFailure",
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::DegenerateSample(_) => "DegenerateSample",
            Error::NoInteriorMaximum(_) => "NoInteriorMaximum",
            Error::OutOfRangeTau(_) => "OutOfRangeTau",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
            Error::Csv(_) => "CsvError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} = {v} is not in [0, 1]")));
    }
    Ok(())
}

pub(crate) fn check_unit_all(name: &str, v: &[f64]) -> Result<()> {
    v.iter().try_for_each(|&x| check_unit(name, x))
}
