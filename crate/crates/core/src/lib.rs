//! Deterministic, seedable simulator and analysis toolkit for triggered
//! single-photon sources with synchronized electro-optic temporal gating.
//!
//! The crate is organized as a pipeline of pure stages:
//!
//! * [`emitter`] — pulsed emitter model producing photon record streams
//! * [`gate`] — electro-optic amplitude modulator (stochastic gating and
//!   the analytic transmission theory)
//! * [`optics`] — beamsplitters, the HOM interferometer, and the
//!   two-photon wavepacket overlap
//! * [`detector`] — SPAD/TCSPC models, time tags, and correlation
//! * [`analysis`] — observable extraction: g²(0), lifetime fits, HOM peak
//!   areas, V inversion, cavity coupling, brightness
//! * [`pipeline`] — scenario configuration and end-to-end runs
//!
//! Every stochastic stage takes an explicit 64-bit seed; equal
//! configuration and seed yields bit-identical output.

pub mod analysis;
pub mod detector;
pub mod emitter;
pub mod gate;
pub mod numeric;
pub mod optics;
pub mod pipeline;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: String, message: String },
    #[error("quadrature failed to converge")]
    QuadratureNonConvergent,
    #[error("quadrature disagrees with closed form: {quadrature} vs {closed}")]
    ClosedFormMismatch { quadrature: f64, closed: f64 },
    #[error("envelope not normalizable (gate entirely outside wavepacket support)")]
    NonNormalizableEnvelope,
    #[error("insufficient counts in histogram tail ({0})")]
    InsufficientCounts(u64),
    #[error("peak windows overlap: {0}")]
    WindowOverlap(String),
    #[error("division by zero in {0}")]
    DivisionByZero(&'static str),
    #[error("no interference possible: epsilon = 1")]
    NoInterference,
    #[error("bad time-tag data at byte {offset}: {message}")]
    TagFormat { offset: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        SimError::InvalidParameter {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

fn require_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(SimError::invalid(field, format!("must be finite, got {value}")))
    }
}
