use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("EPProximity: |discriminant| = {discriminant:e} is within the exceptional-point guard")]
    EpProximity { discriminant: f64 },

    #[error("NoFiniteEP: Re[d12] = 0, the gain/loss contrast cannot be compensated at finite field")]
    NoFiniteEp,

    #[error("NegativeAmplitude: closed-form EP amplitude {eps0} is negative")]
    NegativeAmplitude { eps0: f64 },

    #[error("time {t} outside [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("EPOnContour: |discriminant| = {discriminant:e} at t = {t}")]
    EpOnContour { t: f64, discriminant: f64 },

    #[error("Undersampled: argument jump {jump:.3} rad between adjacent samples near t = {t}")]
    Undersampled { t: f64, jump: f64 },

    #[error("AmbiguousTracking: overlaps {same:.4e} and {cross:.4e} at t = {t} are within 10%")]
    AmbiguousTracking { t: f64, same: f64, cross: f64 },

    #[error("StepSizeUnderflow: step {step:e} at t = {t}")]
    StepSizeUnderflow { t: f64, step: f64 },

    #[error("NonFinite: state left the representable range at t = {t}")]
    NonFinite { t: f64 },

    #[error("ZeroNorm: both amplitudes vanish at t = {t}")]
    ZeroNorm { t: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::EpProximity { .. } => "EPProximity",
            Error::NoFiniteEp => "NoFiniteEP",
            Error::NegativeAmplitude { .. } => "NegativeAmplitude",
            Error::TimeOutOfRange { .. } => "TimeOutOfRange",
            Error::EpOnContour { .. } => "EPOnContour",
            Error::Undersampled { .. } => "Undersampled",
            Error::AmbiguousTracking { .. } => "AmbiguousTracking",
            Error::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            Error::NonFinite { .. } => "NonFinite",
            Error::ZeroNorm { .. } => "ZeroNorm",
            Error::Precondition(_) => "Precondition",
        }
    }
}
