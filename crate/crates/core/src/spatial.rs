//! Concentration/density conversion and nearest-neighbour distance
//! statistics for a random (Poisson) distribution of nitrogen defects.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Carbon lattice site density of diamond: 1.76e23 cm^-3 expressed in nm^-3.
///
/// This value makes 35.5 ppm correspond to 6.25e-3 nm^-3. Override it only
/// for non-diamond hosts.
pub const CARBON_SITE_DENSITY_PER_NM3: f64 = 176.0;

/// (3 / 4pi)^(1/3) * Gamma(4/3): multiplies rho^(-1/3) to give the mean
/// nearest-neighbour distance of a Poisson point process.
pub const NN_DISTANCE_COEFF: f64 = 0.553_960_278_365_090_2;

/// Defect number density in nm^-3.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct NumberDensity(f64);

impl NumberDensity {
    pub fn new(per_nm3: f64) -> Result<Self> {
        if !per_nm3.is_finite() || per_nm3 < 0.0 {
            return Err(Error::NegativeDensity(per_nm3));
        }
        Ok(Self(per_nm3))
    }

    pub fn per_nm3(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

/// Distance in nanometres.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct DistanceNm(f64);

impl DistanceNm {
    pub fn new(nm: f64) -> Result<Self> {
        if !nm.is_finite() || nm <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "separation distance must be positive, got {nm} nm"
            )));
        }
        Ok(Self(nm))
    }

    pub fn nm(self) -> f64 {
        self.0
    }
}

/// Converts a concentration in ppm of lattice sites to a number density,
/// using the diamond site density.
pub fn ppm_to_density(ppm: f64) -> Result<NumberDensity> {
    ppm_to_density_with(ppm, CARBON_SITE_DENSITY_PER_NM3)
}

/// Same as [`ppm_to_density`] with an explicit host site density.
pub fn ppm_to_density_with(ppm: f64, site_density_per_nm3: f64) -> Result<NumberDensity> {
    if !ppm.is_finite() || ppm < 0.0 {
        return Err(Error::NegativeConcentration(ppm));
    }
    NumberDensity::new(ppm * site_density_per_nm3 * 1e-6)
}

/// Exact inverse of [`ppm_to_density`].
pub fn density_to_ppm(d: NumberDensity) -> f64 {
    density_to_ppm_with(d, CARBON_SITE_DENSITY_PER_NM3)
}

pub fn density_to_ppm_with(d: NumberDensity, site_density_per_nm3: f64) -> f64 {
    d.per_nm3() / (site_density_per_nm3 * 1e-6)
}

/// Mean distance between a point and its nearest neighbour in a Poisson
/// process of density `d`: (3 / (4 pi rho))^(1/3) * Gamma(4/3).
pub fn mean_nn_distance(d: NumberDensity) -> Result<DistanceNm> {
    if d.is_zero() {
        return Err(Error::ZeroDensity(0.0));
    }
    DistanceNm::new(NN_DISTANCE_COEFF * d.per_nm3().powf(-1.0 / 3.0))
}

/// Nearest-neighbour distance law: P(R <= r) = 1 - exp(-(4/3) pi rho r^3).
pub fn nn_distance_cdf(d: NumberDensity, r_nm: f64) -> Result<f64> {
    if d.is_zero() {
        return Err(Error::ZeroDensity(0.0));
    }
    if !r_nm.is_finite() || r_nm < 0.0 {
        return Err(Error::InvalidInput(format!(
            "distance must be non-negative, got {r_nm} nm"
        )));
    }
    Ok(-(-(4.0 / 3.0) * PI * d.per_nm3() * r_nm.powi(3)).exp_m1())
}

/// Quantile of the nearest-neighbour law:
/// r(u) = (3 ln(1 / (1 - u)) / (4 pi rho))^(1/3) for u in [0, 1).
pub fn nn_distance_quantile(d: NumberDensity, u: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&u));
    (3.0 * (-(1.0 - u).ln()) / (4.0 * PI * d.per_nm3())).powf(1.0 / 3.0)
}

/// Draws `n` nearest-neighbour distances by inverse-CDF sampling.
///
/// Deterministic for a fixed `(seed, n, d)`; the stream does not depend on
/// call interleaving.
pub fn sample_nn_distances(d: NumberDensity, n: usize, seed: u64) -> Result<Vec<DistanceNm>> {
    if d.is_zero() {
        return Err(Error::ZeroDensity(0.0));
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NN_SAMPLE_STREAM);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        out.push(DistanceNm(nn_distance_quantile(d, u)));
    }
    Ok(out)
}

pub(crate) const NN_SAMPLE_STREAM: u64 = 1;
