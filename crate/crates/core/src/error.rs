use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-positive mass: {field} = {value}")]
    NonPositiveMass { field: &'static str, value: f64 },
    #[error("negative rate: {field} = {value}")]
    NegativeRate { field: &'static str, value: f64 },
    #[error("non-positive width: {field} = {value}")]
    NonPositiveWidth { field: &'static str, value: f64 },
    #[error("non-positive velocity: {0}")]
    NonPositiveVelocity(f64),
    #[error("matching system is numerically singular (pivot ratio {0:e})")]
    SingularMatching(f64),
    #[error("absorption {0} outside the physical band")]
    NonPhysicalAbsorption(f64),
    #[error("profile support is empty after truncation")]
    EmptySupport,
    #[error("packet norm deficit: {0}")]
    NormDeficit(String),
    #[error("spatial domain too small: boundary weight {0:e}")]
    DomainTooSmall(f64),
    #[error("dN/dt and gamma*P2 disagree by {0:e} (relative, integrated)")]
    ConsistencyFailure(f64),
    #[error("time grids are incompatible: {0}")]
    GridMismatch(String),
    #[error("distribution integrates to zero")]
    ZeroIntegral,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag, used in the error column of CSV output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonPositiveMass { .. } => "non-positive-mass",
            Error::NegativeRate { .. } => "negative-rate",
            Error::NonPositiveWidth { .. } => "non-positive-width",
            Error::NonPositiveVelocity(_) => "non-positive-velocity",
            Error::SingularMatching(_) => "singular-matching",
            Error::NonPhysicalAbsorption(_) => "non-physical-absorption",
            Error::EmptySupport => "empty-support",
            Error::NormDeficit(_) => "norm-deficit",
            Error::DomainTooSmall(_) => "domain-too-small",
            Error::ConsistencyFailure(_) => "consistency-failure",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::ZeroIntegral => "zero-integral",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// Process exit status: 1 for bad input, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonPositiveMass { .. }
            | Error::NegativeRate { .. }
            | Error::NonPositiveWidth { .. }
            | Error::NonPositiveVelocity(_)
            | Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::Io(_) => 1,
            _ => 2,
        }
    }
}
