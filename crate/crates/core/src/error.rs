use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

/// One iterate of the envelope fit, kept so a failed fit can be inspected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitTraceEntry {
    pub iteration: usize,
    pub a: f64,
    pub b: f64,
    pub cost: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("momentum-grid aliasing at step {step}: edge amplitude {amplitude:.3e} exceeds {limit:.1e}")]
    Aliasing { step: usize, amplitude: f64, limit: f64 },

    #[error("relative energy drift {drift:.3e} exceeds {limit:.1e} at step {step}; use a smaller dt")]
    EnergyDrift { step: usize, drift: f64, limit: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("envelope fit did not converge after {iterations} iterations: {reason}")]
    FitFailure { iterations: usize, reason: String, trace: Vec<FitTraceEntry> },

    #[error("phase-space leakage {leakage:.3e}: enlarge the {axis} range beyond [{lo:.4}, {hi:.4}]")]
    Leakage { leakage: f64, axis: &'static str, lo: f64, hi: f64 },
}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
