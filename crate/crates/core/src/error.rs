use thiserror::Error;

/// Errors raised when constructing or combining survey objects.
///
/// Every variant maps to a stable machine-readable code via [`Error::code`];
/// the CLI reports that code on its error stream.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("support needs at least 2 values, got {0}")]
    SupportTooSmall(usize),
    #[error("support value at index {0} is not finite")]
    NonFiniteValue(usize),
    #[error("support values at indices {0} and {1} are equal")]
    DuplicateValue(usize, usize),
    #[error("support has {values} values but {flags} stigma flags")]
    StigmaLength { values: usize, flags: usize },
    #[error("at least one support value must be stigmatizing")]
    NoStigmatizingValue,
    #[error("probability at index {0} is negative or not finite")]
    InvalidProbability(usize),
    #[error("probabilities sum to {0}, outside the accepted band around 1")]
    NotNormalized(f64),
    #[error("device parameter p = {0} is outside (0, 1)")]
    InvalidDeviceParameter(f64),
    #[error("privacy threshold xi = {0} is outside (0, 1)")]
    XiOutOfRange(f64),
    #[error("prior bound c = {0} is outside (0, 1)")]
    COutOfRange(f64),
    #[error("privacy threshold xi = {xi} must be smaller than the prior bound c = {c}")]
    XiNotBelowC { xi: f64, c: f64 },
    #[error("non-stigmatizing index set must be non-empty and proper, got {t} of {m}")]
    InvalidSubsetSize { t: usize, m: usize },
    #[error("index {index} is out of range for {m} values")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("privacy policy does not match the support's stigma flags: {0}")]
    PolicyMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("replicate count must be at least 1")]
    NoReplicates,
    #[error("grid step {0} is outside (0, 0.5]")]
    InvalidGridStep(f64),
    #[error("constraint is infeasible: mass bound {0} exceeds 1")]
    InfeasibleConstraint(f64),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::SupportTooSmall(_) => "SUPPORT_TOO_SMALL",
            Error::NonFiniteValue(_) => "NON_FINITE_VALUE",
            Error::DuplicateValue(..) => "DUPLICATE_VALUE",
            Error::StigmaLength { .. } => "STIGMA_LENGTH",
            Error::NoStigmatizingValue => "NO_STIGMATIZING_VALUE",
            Error::InvalidProbability(_) => "INVALID_PROBABILITY",
            Error::NotNormalized(_) => "NOT_NORMALIZED",
            Error::InvalidDeviceParameter(_) => "INVALID_P",
            Error::XiOutOfRange(_) => "XI_OUT_OF_RANGE",
            Error::COutOfRange(_) => "C_OUT_OF_RANGE",
            Error::XiNotBelowC { .. } => "XI_GE_C",
            Error::InvalidSubsetSize { .. } => "INVALID_SUBSET",
            Error::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            Error::PolicyMismatch(_) => "POLICY_MISMATCH",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::EmptySample => "EMPTY_SAMPLE",
            Error::NoReplicates => "NO_REPLICATES",
            Error::InvalidGridStep(_) => "INVALID_GRID_STEP",
            Error::InfeasibleConstraint(_) => "INFEASIBLE_CONSTRAINT",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
