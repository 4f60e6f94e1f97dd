//! Error types shared across the crate.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by contract violations and numerical failures.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A dimension precondition was violated.
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// An argument was outside its documented domain.
    InvalidArgument { context: &'static str, detail: String },
    /// A non-finite value appeared where finiteness is required.
    NonFinite { context: &'static str },
    /// A sampler produced a non-finite state; carries the offending step.
    Divergence { step: usize },
    /// Two density grids that must share axes do not.
    GridMismatch,
    /// A grid could not be extended to cover the density's support.
    SupportNotCovered { extensions: usize },
    /// The evidence integral vanished; the instance is ill-posed.
    ZeroEvidence,
    /// The measured TV exceeded the proven bound; indicates a bug upstream.
    TheoremViolation { tv: f64, bound: f64 },
    /// A sample set has zero within-cluster spread.
    DegenerateSampleSet,
    /// Too few samples for the requested estimate.
    NotEnoughSamples { got: usize, need: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                context,
                expected,
                got,
            } => write!(f, "{context}: expected dimension {expected}, got {got}"),
            Error::InvalidArgument { context, detail } => {
                write!(f, "{context}: {detail}")
            }
            Error::NonFinite { context } => write!(f, "{context}: non-finite value"),
            Error::Divergence { step } => {
                write!(f, "chain diverged (non-finite state) at step {step}")
            }
            Error::GridMismatch => write!(f, "density grids do not share the same axes"),
            Error::SupportNotCovered { extensions } => write!(
                f,
                "grid boundary still carries mass after {extensions} extensions"
            ),
            Error::ZeroEvidence => write!(f, "evidence integral is zero; instance is ill-posed"),
            Error::TheoremViolation { tv, bound } => write!(
                f,
                "posterior TV {tv} exceeds proven bound {bound}; implementation bug"
            ),
            Error::DegenerateSampleSet => {
                write!(f, "sample set has zero within-cluster spread")
            }
            Error::NotEnoughSamples { got, need } => {
                write!(f, "need at least {need} samples, got {got}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
