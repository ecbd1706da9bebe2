use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("subarrays {first} and {second} overlap: subarray {first} ends at {end} m, subarray {second} starts at {start} m")]
    SubarrayOverlap {
        first: usize,
        second: usize,
        end: f64,
        start: f64,
    },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("angle {theta} rad is outside the open interval (-pi/2, pi/2)")]
    AngleOutOfRange { theta: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// A matrix that must be inverted (or have full column rank) is too badly
    /// conditioned. `condition` is the 2-norm condition number, possibly infinite.
    #[error("singular model in {what}: condition number {condition:e}")]
    SingularModel { what: &'static str, condition: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("outside the scope of the concentration bound: {0}")]
    OutOfScope(String),

    #[error("not enough grid points: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("peak search found {found} extrema, expected {wanted}")]
    PeakSearch { found: usize, wanted: usize },

    #[error("every point of the sweep is singular")]
    AllSingular,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
