//! Nitrogen-quenching analysis of NV- fluorescence in diamond.
//!
//! The crate turns raw decay histograms and absorption spectra into defect
//! concentrations, lifetimes, tunnelling rates and relative quantum yields,
//! and predicts quantum yield as a function of nitrogen density via a
//! tunnelling model:
//!
//! - [`spatial`] - ppm/density conversion and nearest-neighbour statistics
//!   of a Poisson defect distribution
//! - [`quench`] - the tunnelling-quench rate model and its inversion
//! - [`numopt`] - gamma function, weighted nonlinear least squares, linear
//!   regression
//! - [`lifetime`] - stretched-exponential fitting of TCSPC histograms
//! - [`simulate`] - deterministic Monte Carlo ensemble decay generator
//! - [`spectra`] - FTIR/visible concentration calibration and NNMF
//!   unmixing of NV0/NV- emission
//! - [`sensitivity`] - ensemble magnetometry figure of merit

// `!(x > 0.0)` rejects NaN along with the out-of-domain values; the
// de-negated forms clippy prefers would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lifetime;
pub mod numopt;
pub mod quench;
pub mod sensitivity;
pub mod simulate;
pub mod spatial;
pub mod spectra;

pub use error::{Error, Result};
pub use lifetime::{Acquisition, DecayHistogram, StretchedExpFit};
pub use numopt::FitResult;
pub use quench::{QuenchParams, RateMhz, TunnellingFit, TunnellingSample};
pub use sensitivity::SensitivityInput;
pub use simulate::EnsembleSimConfig;
pub use spatial::{DistanceNm, NumberDensity};
pub use spectra::{AxisKind, SpectrumSeries, UnmixResult};
