//! Shared error type for all analysis modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative concentration: {0} ppm")]
    NegativeConcentration(f64),

    #[error("negative number density: {0} nm^-3")]
    NegativeDensity(f64),

    #[error("number density must be positive, got {0} nm^-3")]
    ZeroDensity(f64),

    #[error("requested an empty sample")]
    EmptySample,

    #[error("total decay rate must be positive, got {0} MHz")]
    ZeroTotalRate(f64),

    #[error(
        "measured lifetime {tau_ns} ns implies a tunnelling rate of {deficit_mhz} MHz below \
         the k0 benchmark, beyond the {tolerance_mhz} MHz clamp tolerance"
    )]
    InconsistentLifetime {
        tau_ns: f64,
        deficit_mhz: f64,
        tolerance_mhz: f64,
    },

    #[error("target relative yield {target} is unreachable; model range is ({min:.6}, 1)")]
    UnreachableYield { target: f64, min: f64 },

    #[error("gamma function domain error: x = {0} (requires x > 0)")]
    GammaDomain(f64),

    #[error("histogram peak has {peak} counts; at least {required} are required for a fit")]
    InsufficientCounts { peak: u64, required: u64 },

    #[error("weighted normal matrix is singular or rank-deficient")]
    RankDeficient,

    #[error("invalid fit input: {0}")]
    InvalidFitInput(String),

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("axis does not cover {needed} (axis spans {min}..{max})")]
    AxisOutOfRange { needed: f64, min: f64, max: f64 },

    #[error("spectra contain negative values; non-negative input is required")]
    NegativeValues,

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
