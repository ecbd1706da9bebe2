//! Cramér-Rao bounds, Q statistics and subspace estimators for fully and
//! partly calibrated distributed linear arrays.

// `!(x > 0.0)` style guards are deliberate: NaN has to fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crb;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod linalg;
pub mod montecarlo;
pub mod plateau_approx;
pub mod qstats;
pub mod signal;
pub mod sweep;

pub use error::{Error, Result};
pub use geometry::ArrayGeometry;
pub use signal::{Amplitudes, Placement, SnapshotSet, SourceScenario};

pub type C64 = nalgebra::Complex<f64>;

/// Calibration assumption used by a bound or estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CalibrationMode {
    /// All element positions known.
    Fully,
    /// Intra-subarray positions known, inter-subarray offsets unknown.
    Partly,
}

impl CalibrationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CalibrationMode::Fully => "fully",
            CalibrationMode::Partly => "partly",
        }
    }
}

impl std::fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CalibrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fully" | "fc" => Ok(CalibrationMode::Fully),
            "partly" | "pc" => Ok(CalibrationMode::Partly),
            other => Err(Error::InvalidScenario(format!("unknown calibration mode {other:?}"))),
        }
    }
}
