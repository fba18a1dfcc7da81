//! Tunnelling-quench rate model: total decay rate to lifetime, relative
//! quantum yield, the distance-dependent tunnelling rate, the yield vs
//! nitrogen-density curve and its inversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numopt::{self, DecayingExp};
use crate::spatial::{self, DistanceNm, NumberDensity, NN_DISTANCE_COEFF};

/// Default clamp window for slightly negative extracted tunnelling rates,
/// matching the uncertainty of the k0 benchmark (0.4 MHz).
pub const DEFAULT_CLAMP_TOLERANCE_MHZ: f64 = 0.5;

/// Decay rate in MHz (1e-3 ns^-1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct RateMhz(f64);

impl RateMhz {
    pub fn new(mhz: f64) -> Result<Self> {
        if !mhz.is_finite() || mhz < 0.0 {
            return Err(Error::InvalidInput(format!(
                "decay rate must be non-negative, got {mhz} MHz"
            )));
        }
        Ok(Self(mhz))
    }

    pub fn mhz(self) -> f64 {
        self.0
    }

    pub const ZERO: RateMhz = RateMhz(0.0);
}

/// Model constants of the quench curve, with one-sigma uncertainties.
///
/// `k0` lumps the radiative and nitrogen-independent non-radiative rates;
/// the data only ever constrain their sum. `alpha_rho` is derived:
/// `alpha * (3/(4 pi))^(1/3) * Gamma(4/3)`, the coefficient that converts
/// a density^(-1/3) into the mean donor-acceptor distance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuenchParams {
    k0_mhz: f64,
    k0_err_mhz: f64,
    a_mhz: f64,
    a_err_mhz: f64,
    alpha_per_nm: f64,
    alpha_err_per_nm: f64,
    alpha_rho_per_nm: f64,
    alpha_rho_err_per_nm: f64,
}

impl QuenchParams {
    pub fn new(k0_mhz: f64, a_mhz: f64, alpha_per_nm: f64) -> Result<Self> {
        Self::with_uncertainties(k0_mhz, 0.0, a_mhz, 0.0, alpha_per_nm, 0.0)
    }

    pub fn with_uncertainties(
        k0_mhz: f64,
        k0_err_mhz: f64,
        a_mhz: f64,
        a_err_mhz: f64,
        alpha_per_nm: f64,
        alpha_err_per_nm: f64,
    ) -> Result<Self> {
        if !(k0_mhz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "k0 must be positive, got {k0_mhz} MHz"
            )));
        }
        if !(a_mhz >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "A must be non-negative, got {a_mhz} MHz"
            )));
        }
        if !(alpha_per_nm > 0.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must be positive, got {alpha_per_nm} nm^-1"
            )));
        }
        if [k0_err_mhz, a_err_mhz, alpha_err_per_nm]
            .iter()
            .any(|e| !e.is_finite() || *e < 0.0)
        {
            return Err(Error::InvalidInput(
                "parameter uncertainties must be non-negative".into(),
            ));
        }
        Ok(Self {
            k0_mhz,
            k0_err_mhz,
            a_mhz,
            a_err_mhz,
            alpha_per_nm,
            alpha_err_per_nm,
            alpha_rho_per_nm: alpha_per_nm * NN_DISTANCE_COEFF,
            alpha_rho_err_per_nm: alpha_err_per_nm * NN_DISTANCE_COEFF,
        })
    }

    /// Construct from the density-space coefficient instead of alpha.
    pub fn from_alpha_rho(k0_mhz: f64, a_mhz: f64, alpha_rho_per_nm: f64) -> Result<Self> {
        Self::new(k0_mhz, a_mhz, alpha_rho_per_nm / NN_DISTANCE_COEFF)
    }

    /// Published best-fit values for NV- quenching by substitutional
    /// nitrogen in diamond: k0 = 72.0(4) MHz, A = 185(87) MHz,
    /// alpha = 0.53(12) nm^-1.
    pub fn published() -> Self {
        Self::with_uncertainties(72.0, 0.4, 185.0, 87.0, 0.53, 0.12)
            .expect("published constants are valid")
    }

    pub fn k0_mhz(&self) -> f64 {
        self.k0_mhz
    }
    pub fn k0_err_mhz(&self) -> f64 {
        self.k0_err_mhz
    }
    pub fn a_mhz(&self) -> f64 {
        self.a_mhz
    }
    pub fn a_err_mhz(&self) -> f64 {
        self.a_err_mhz
    }
    pub fn alpha_per_nm(&self) -> f64 {
        self.alpha_per_nm
    }
    pub fn alpha_err_per_nm(&self) -> f64 {
        self.alpha_err_per_nm
    }
    pub fn alpha_rho_per_nm(&self) -> f64 {
        self.alpha_rho_per_nm
    }
    pub fn alpha_rho_err_per_nm(&self) -> f64 {
        self.alpha_rho_err_per_nm
    }

    /// True when the parameters agree with the published best-fit set
    /// within its quoted uncertainties.
    pub fn matches_published(&self) -> bool {
        let p = Self::published();
        (self.k0_mhz - p.k0_mhz).abs() <= p.k0_err_mhz
            && (self.a_mhz - p.a_mhz).abs() <= p.a_err_mhz
            && (self.alpha_per_nm - p.alpha_per_nm).abs() <= p.alpha_err_per_nm
    }
}

/// Note attached to yield predictions made with the published parameter set.
///
/// Evaluating the yield curve with the published constants gives ~66% at
/// 35.5 ppm, not the published 90% threshold; inverting the same curve for
/// 90% gives ~4.7 ppm. The published threshold is not reproducible from the
/// published constants, so reports carry this caveat instead of adjusting
/// either number.
pub const PUBLISHED_THRESHOLD_DISCREPANCY: &str = "the published 90% yield threshold of \
     35.5 ppm is not reproducible from the published best-fit constants (k0 = 72 MHz, \
     A = 185 MHz, alpha_rho = 0.294 nm^-1): the curve gives ~66% at 35.5 ppm and reaches \
     90% near 4.7 ppm";

/// Returns the threshold caveat when the active parameters are the
/// published set.
pub fn discrepancy_note(p: &QuenchParams) -> Option<&'static str> {
    p.matches_published()
        .then_some(PUBLISHED_THRESHOLD_DISCREPANCY)
}

/// Mean lifetime in ns from the total decay rate: 1000 / (k0 + k_tunnel).
pub fn lifetime_from_rates(p: &QuenchParams, k_tunnel: RateMhz) -> Result<f64> {
    let total = p.k0_mhz + k_tunnel.mhz();
    if !(total > 0.0) {
        return Err(Error::ZeroTotalRate(total));
    }
    Ok(1000.0 / total)
}

/// Extracts the tunnelling rate from a measured mean lifetime:
/// k_tunnel = 1000 / tau_bar - k0.
///
/// Values in `[-tolerance, 0)` clamp to zero (measurement noise around the
/// benchmark); anything below `-tolerance` means the lifetime exceeds the
/// low-nitrogen benchmark beyond noise and is rejected.
pub fn tunnel_rate_from_lifetime(
    tau_bar_ns: f64,
    k0_mhz: f64,
    tolerance_mhz: f64,
) -> Result<RateMhz> {
    if !(tau_bar_ns > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lifetime must be positive, got {tau_bar_ns} ns"
        )));
    }
    if !(k0_mhz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "k0 must be positive, got {k0_mhz} MHz"
        )));
    }
    let k = 1000.0 / tau_bar_ns - k0_mhz;
    if k < -tolerance_mhz {
        return Err(Error::InconsistentLifetime {
            tau_ns: tau_bar_ns,
            deficit_mhz: -k,
            tolerance_mhz,
        });
    }
    RateMhz::new(k.max(0.0))
}

/// Distance-dependent tunnelling rate A * exp(-alpha * r).
pub fn tunnel_rate_at_distance(p: &QuenchParams, r: DistanceNm) -> RateMhz {
    RateMhz(p.a_mhz * (-p.alpha_per_nm * r.nm()).exp())
}

/// Relative quantum yield from rates: k0 / (k0 + k_tunnel).
pub fn relative_qy(k0_mhz: f64, k_tunnel: RateMhz) -> f64 {
    k0_mhz / (k0_mhz + k_tunnel.mhz())
}

/// First-order uncertainty on [`relative_qy`] from the k0 and tunnelling
/// rate uncertainties.
pub fn relative_qy_uncertainty(
    k0_mhz: f64,
    k0_err_mhz: f64,
    k_tunnel: RateMhz,
    k_tunnel_err_mhz: f64,
) -> f64 {
    let total = k0_mhz + k_tunnel.mhz();
    let d_k0 = k_tunnel.mhz() / (total * total);
    let d_kt = k0_mhz / (total * total);
    (d_k0 * k0_err_mhz).hypot(d_kt * k_tunnel_err_mhz)
}

/// Yield vs nitrogen density:
/// eps_rel(rho) = k0 / (k0 + A exp(-alpha_rho * rho^(-1/3))).
///
/// The zero-density limit is exactly 1 (no quenching); the curve is
/// strictly decreasing in density.
pub fn relative_qy_model(p: &QuenchParams, d: NumberDensity) -> f64 {
    if d.is_zero() {
        return 1.0;
    }
    let k_tunnel = model_tunnel_rate(p, d);
    p.k0_mhz / (p.k0_mhz + k_tunnel)
}

/// The Eq.-3 denominator term A exp(-alpha_rho * rho^(-1/3)) in MHz;
/// identical to evaluating the distance law at the mean nearest-neighbour
/// distance.
pub fn model_tunnel_rate(p: &QuenchParams, d: NumberDensity) -> f64 {
    p.a_mhz * (-p.alpha_rho_per_nm * d.per_nm3().powf(-1.0 / 3.0)).exp()
}

/// First-order uncertainty on [`relative_qy_model`] from the parameter
/// uncertainties (k0, A, alpha_rho treated as independent).
pub fn relative_qy_model_uncertainty(p: &QuenchParams, d: NumberDensity) -> f64 {
    if d.is_zero() {
        return 0.0;
    }
    let u = d.per_nm3().powf(-1.0 / 3.0);
    let kt = model_tunnel_rate(p, d);
    let total = p.k0_mhz + kt;
    let eps = p.k0_mhz / total;
    let d_k0 = kt / (total * total);
    let d_kt = -p.k0_mhz / (total * total);
    let dkt_da = kt / p.a_mhz.max(f64::MIN_POSITIVE);
    let dkt_dar = -u * kt;
    let var = (d_k0 * p.k0_err_mhz).powi(2)
        + (d_kt * dkt_da * p.a_err_mhz).powi(2)
        + (d_kt * dkt_dar * p.alpha_rho_err_per_nm).powi(2);
    debug_assert!(eps > 0.0);
    var.sqrt()
}

/// Inverts the yield curve: the unique density where
/// `relative_qy_model(p, d) == target`.
///
/// Closed form d = (alpha_rho / ln(A t / (k0 (1 - t))))^3, verified against
/// a forward evaluation to 1e-9 relative. Targets at or below the
/// large-density floor k0 / (k0 + A) are unreachable.
pub fn max_density_for_qy(p: &QuenchParams, target: f64) -> Result<NumberDensity> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!(
            "target yield must lie in (0, 1), got {target}"
        )));
    }
    let floor = p.k0_mhz / (p.k0_mhz + p.a_mhz);
    // Required tunnelling rate k0 (1-t)/t must not exceed the zero-distance
    // limit A.
    let log_arg = p.a_mhz * target / (p.k0_mhz * (1.0 - target));
    if log_arg <= 1.0 {
        return Err(Error::UnreachableYield { target, min: floor });
    }
    let d = NumberDensity::new((p.alpha_rho_per_nm / log_arg.ln()).powi(3))?;
    let check = relative_qy_model(p, d);
    if ((check - target) / target).abs() > 1e-9 {
        return Err(Error::DegenerateFit(format!(
            "inversion self-check failed: eps({}) = {check}, wanted {target}",
            d.per_nm3()
        )));
    }
    Ok(d)
}

/// One measured sample row: nitrogen concentration and average lifetime
/// with their uncertainties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TunnellingSample {
    pub id: String,
    pub rho_n_ppm: f64,
    pub rho_n_err_ppm: f64,
    pub tau_ns: f64,
    pub tau_err_ns: f64,
}

/// Per-sample quantities derived from a [`TunnellingSample`].
#[derive(Debug, Clone, Serialize)]
pub struct DerivedSample {
    pub id: String,
    pub rho_n_per_nm3: f64,
    pub mean_distance_nm: f64,
    pub k_tunnel_mhz: f64,
    pub k_tunnel_err_mhz: f64,
    pub epsilon_rel: f64,
    pub epsilon_rel_err: f64,
}

/// Weighted exponential fit of tunnelling rate vs mean donor distance.
#[derive(Debug, Clone, Serialize)]
pub struct TunnellingFit {
    pub a_mhz: f64,
    pub a_err_mhz: f64,
    pub alpha_per_nm: f64,
    pub alpha_err_per_nm: f64,
    pub alpha_rho_per_nm: f64,
    pub alpha_rho_err_per_nm: f64,
    pub covariance: Vec<Vec<f64>>,
    pub reduced_chi2: f64,
    pub converged: bool,
    pub samples: Vec<DerivedSample>,
}

/// Converts a sample table into (mean distance, tunnelling rate) points and
/// fits k = A exp(-alpha r), weighted by the inverse squared rate
/// uncertainties.
///
/// Rate uncertainties propagate from the lifetime and k0 errors. At least
/// 3 samples are required, and at least one must carry a nonzero
/// tunnelling rate or A is unidentifiable.
pub fn fit_tunnelling_curve(
    samples: &[TunnellingSample],
    k0_mhz: f64,
    k0_err_mhz: f64,
    clamp_tolerance_mhz: f64,
    site_density_per_nm3: f64,
) -> Result<TunnellingFit> {
    if samples.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 samples with (rho_N, tau, err), got {}",
            samples.len()
        )));
    }

    let mut derived = Vec::with_capacity(samples.len());
    let mut r = Vec::with_capacity(samples.len());
    let mut k = Vec::with_capacity(samples.len());
    let mut sigma = Vec::with_capacity(samples.len());
    for s in samples {
        if !(s.tau_err_ns > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample {}: lifetime uncertainty must be positive",
                s.id
            )));
        }
        let rho = spatial::ppm_to_density_with(s.rho_n_ppm, site_density_per_nm3)?;
        let mean_r = spatial::mean_nn_distance(rho)?;
        let kt = tunnel_rate_from_lifetime(s.tau_ns, k0_mhz, clamp_tolerance_mhz)?;
        let kt_err = (1000.0 * s.tau_err_ns / (s.tau_ns * s.tau_ns)).hypot(k0_err_mhz);
        let eps = relative_qy(k0_mhz, kt);
        let eps_err = relative_qy_uncertainty(k0_mhz, k0_err_mhz, kt, kt_err);
        derived.push(DerivedSample {
            id: s.id.clone(),
            rho_n_per_nm3: rho.per_nm3(),
            mean_distance_nm: mean_r.nm(),
            k_tunnel_mhz: kt.mhz(),
            k_tunnel_err_mhz: kt_err,
            epsilon_rel: eps,
            epsilon_rel_err: eps_err,
        });
        r.push(mean_r.nm());
        k.push(kt.mhz());
        sigma.push(kt_err);
    }

    let positive: Vec<usize> = (0..k.len()).filter(|&i| k[i] > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::DegenerateFit(
            "every sample has zero tunnelling rate; A is unidentifiable".into(),
        ));
    }

    // Initial guess from the extreme positive-rate points.
    let (first, last) = (positive[0], *positive.last().unwrap());
    let alpha0 = if first != last && r[first] != r[last] {
        ((k[first] / k[last]).ln() / (r[last] - r[first])).max(0.05)
    } else {
        0.5
    };
    let a0 = k[first] * (alpha0 * r[first]).exp();

    let fit = numopt::fit_nonlinear_weighted(&DecayingExp, &r, &k, &sigma, &[a0, alpha0])?;
    let errs = fit.std_errors();
    Ok(TunnellingFit {
        a_mhz: fit.parameters[0],
        a_err_mhz: errs[0],
        alpha_per_nm: fit.parameters[1],
        alpha_err_per_nm: errs[1],
        alpha_rho_per_nm: fit.parameters[1] * NN_DISTANCE_COEFF,
        alpha_rho_err_per_nm: errs[1] * NN_DISTANCE_COEFF,
        covariance: fit.covariance,
        reduced_chi2: fit.reduced_chi2,
        converged: fit.converged,
        samples: derived,
    })
}
