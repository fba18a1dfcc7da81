//! Gamma function via a Lanczos approximation (g = 7, 9 coefficients).

#![allow(clippy::excessive_precision)] // canonical coefficient digits kept verbatim

use crate::error::{Error, Result};

// Lanczos g=7 coefficient set, as published with the GNU Scientific Library.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFF: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// Gamma function for positive arguments.
///
/// Relative error stays below 1e-10 across the working range [0.1, 20].
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::GammaDomain(x));
    }
    Ok(lanczos_gamma(x))
}

/// Lanczos evaluation; assumes x > 0. Arguments below 0.5 go through the
/// recurrence gamma(x) = gamma(x + 1) / x to stay on the accurate branch.
pub(crate) fn lanczos_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return lanczos_gamma(x + 1.0) / x;
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEFF[0];
    for (i, &c) in LANCZOS_COEFF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}
