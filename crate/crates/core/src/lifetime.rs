//! Stretched-exponential fitting of TCSPC decay histograms and conversion
//! of the fit parameters into distribution-average lifetimes and relative
//! quantum yields.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numopt::{self, lanczos_gamma, CurveModel, StretchedExp};
use crate::quench::{self, RateMhz};

/// Minimum peak count for a meaningful weighted fit.
pub const MIN_PEAK_COUNTS: u64 = 100;

/// Optional acquisition metadata carried with a histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Acquisition {
    pub rep_period_ns: f64,
    pub total_pulses: Option<u64>,
}

/// A binned photon-arrival histogram with uniform bin width.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayHistogram {
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
    pub acquisition: Option<Acquisition>,
}

impl DecayHistogram {
    pub fn new(
        bin_edges: Vec<f64>,
        counts: Vec<u64>,
        acquisition: Option<Acquisition>,
    ) -> Result<Self> {
        if counts.len() < 10 {
            return Err(Error::InvalidHistogram(format!(
                "need at least 10 bins, got {}",
                counts.len()
            )));
        }
        if bin_edges.len() != counts.len() + 1 {
            return Err(Error::InvalidHistogram(format!(
                "{} edges do not delimit {} bins",
                bin_edges.len(),
                counts.len()
            )));
        }
        let width = bin_edges[1] - bin_edges[0];
        if !(width > 0.0) {
            return Err(Error::InvalidHistogram("edges must increase".into()));
        }
        for pair in bin_edges.windows(2) {
            let w = pair[1] - pair[0];
            if !(w > 0.0) || ((w - width) / width).abs() > 1e-6 {
                return Err(Error::InvalidHistogram(
                    "bin width must be uniform and positive".into(),
                ));
            }
        }
        Ok(Self {
            bin_edges,
            counts,
            acquisition,
        })
    }

    /// Builds a histogram from uniformly spaced bin centres.
    pub fn from_centers(
        centers: &[f64],
        counts: Vec<u64>,
        acquisition: Option<Acquisition>,
    ) -> Result<Self> {
        if centers.len() != counts.len() {
            return Err(Error::InvalidHistogram(
                "centres and counts differ in length".into(),
            ));
        }
        if centers.len() < 2 {
            return Err(Error::InvalidHistogram("need at least 10 bins".into()));
        }
        let width = centers[1] - centers[0];
        if !(width > 0.0) {
            return Err(Error::InvalidHistogram("centres must increase".into()));
        }
        let mut edges = Vec::with_capacity(centers.len() + 1);
        edges.push(centers[0] - width / 2.0);
        for &c in centers {
            edges.push(c + width / 2.0);
        }
        Self::new(edges, counts, acquisition)
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the first maximal bin.
    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        best
    }
}

/// Fitted stretched exponential I(t) = i0 exp(-(t/tau0)^beta) + background.
///
/// `covariance` is in (i0, tau0, beta, background) order. The time origin
/// of the fit is the left edge of the peak bin.
#[derive(Debug, Clone, Serialize)]
pub struct StretchedExpFit {
    pub i0: f64,
    pub tau0_ns: f64,
    pub beta: f64,
    pub background: f64,
    pub covariance: Vec<Vec<f64>>,
    pub reduced_chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl StretchedExpFit {
    pub fn tau0_err_ns(&self) -> f64 {
        self.covariance[1][1].max(0.0).sqrt()
    }

    pub fn beta_err(&self) -> f64 {
        self.covariance[2][2].max(0.0).sqrt()
    }
}

/// Stretched exponential with beta mapped through a logistic transform so
/// the optimiser works on an unconstrained axis while beta stays in (0, 1).
struct LogisticBetaStretchedExp;

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

impl CurveModel for LogisticBetaStretchedExp {
    fn arity(&self) -> usize {
        4
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        StretchedExp.value(x, &[p[0], p[1], sigmoid(p[2]), p[3]])
    }

    fn jacobian_row(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let beta = sigmoid(p[2]);
        StretchedExp.jacobian_row(x, &[p[0], p[1], beta, p[3]], out);
        out[2] *= beta * (1.0 - beta); // chain rule through the transform
    }
}

/// Plain exponential plus background; the beta = 1 member of the family,
/// used when the free fit runs into the upper beta boundary.
struct SingleExpWithBackground;

impl CurveModel for SingleExpWithBackground {
    fn arity(&self) -> usize {
        3
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        StretchedExp.value(x, &[p[0], p[1], 1.0, p[2]])
    }

    fn jacobian_row(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let mut full = [0.0; 4];
        StretchedExp.jacobian_row(x, &[p[0], p[1], 1.0, p[2]], &mut full);
        out[0] = full[0];
        out[1] = full[1];
        out[2] = full[3];
    }
}

/// Fits a stretched exponential to a decay histogram.
///
/// The fit window runs from the peak bin to the last bin, with the time
/// origin at the left edge of the peak bin (the instrument-response rise
/// before the peak is discarded). Per-bin weights are Poisson:
/// sigma_i = sqrt(max(count_i, 1)). Non-convergence is flagged on the
/// result rather than raised.
pub fn fit_stretched_exp(h: &DecayHistogram) -> Result<StretchedExpFit> {
    let peak = h.peak_bin();
    let peak_counts = h.counts()[peak];
    if peak_counts < MIN_PEAK_COUNTS {
        return Err(Error::InsufficientCounts {
            peak: peak_counts,
            required: MIN_PEAK_COUNTS,
        });
    }
    let origin = h.bin_edges()[peak];
    let n = h.counts().len() - peak;
    if n < 8 {
        return Err(Error::InvalidHistogram(
            "fewer than 8 bins after the peak".into(),
        ));
    }
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for i in peak..h.counts().len() {
        t.push(h.bin_center(i) - origin);
        let c = h.counts()[i] as f64;
        y.push(c);
        sigma.push(c.max(1.0).sqrt());
    }

    // Initial guesses: peak amplitude, 1/e crossing, beta = 0.9, tail floor.
    let bg0 = {
        let tail = n / 20;
        let tail = tail.max(5).min(n);
        y[n - tail..].iter().sum::<f64>() / tail as f64
    };
    let i0_0 = y[0] - bg0;
    let target = bg0 + i0_0 / std::f64::consts::E;
    let tau0_0 = t
        .iter()
        .zip(&y)
        .find(|(_, &yi)| yi <= target)
        .map(|(&ti, _)| ti)
        .filter(|&ti| ti > 0.0)
        .unwrap_or(t[n / 4].max(h.bin_width()));
    let u0 = (0.9f64 / 0.1).ln(); // beta = 0.9
    let init = [i0_0.max(1.0), tau0_0, u0, bg0];

    let free = numopt::fit_nonlinear_weighted(&LogisticBetaStretchedExp, &t, &y, &sigma, &init);

    // A fit that runs into the upper beta boundary leaves the normal matrix
    // singular along the transform axis. Pin beta = 1 and refit the plain
    // exponential; the pinned parameter carries zero variance.
    let boundary = match &free {
        Ok(f) => sigmoid(f.parameters[2]) > 1.0 - 1e-9,
        Err(Error::RankDeficient) => true,
        Err(_) => false,
    };
    if boundary {
        let pinned = numopt::fit_nonlinear_weighted(
            &SingleExpWithBackground,
            &t,
            &y,
            &sigma,
            &[init[0], init[1], init[3]],
        )?;
        let c = &pinned.covariance;
        let mut cov = vec![vec![0.0; 4]; 4];
        for (a, ia) in [(0usize, 0usize), (1, 1), (3, 2)] {
            for (b, ib) in [(0usize, 0usize), (1, 1), (3, 2)] {
                cov[a][b] = c[ia][ib];
            }
        }
        return Ok(StretchedExpFit {
            i0: pinned.parameters[0],
            tau0_ns: pinned.parameters[1],
            beta: 1.0,
            background: pinned.parameters[2].max(0.0),
            covariance: cov,
            reduced_chi2: pinned.reduced_chi2,
            iterations: pinned.iterations,
            converged: pinned.converged,
        });
    }

    let fit = free?;
    let beta = sigmoid(fit.parameters[2]);
    let dbeta_du = beta * (1.0 - beta);
    // Covariance back in (i0, tau0, beta, bg) coordinates.
    let mut cov = fit.covariance.clone();
    for row in cov.iter_mut() {
        row[2] *= dbeta_du;
    }
    for entry in cov[2].iter_mut() {
        *entry *= dbeta_du;
    }

    Ok(StretchedExpFit {
        i0: fit.parameters[0],
        tau0_ns: fit.parameters[1],
        beta,
        background: fit.parameters[3].max(0.0),
        covariance: cov,
        reduced_chi2: fit.reduced_chi2,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

/// Average lifetime of the fitted distribution:
/// tau_bar = Gamma(2/beta) / Gamma(1/beta) * tau0, with the one-sigma
/// uncertainty propagated from the (tau0, beta) covariance block.
pub fn average_lifetime(f: &StretchedExpFit) -> (f64, f64) {
    let ratio = gamma_ratio(f.beta);
    let tau_bar = ratio * f.tau0_ns;

    // d(tau_bar)/d(beta) by a central difference on the gamma ratio.
    let h = 1e-6 * f.beta;
    let dratio = (gamma_ratio(f.beta + h) - gamma_ratio(f.beta - h)) / (2.0 * h);
    let g = [ratio, f.tau0_ns * dratio]; // gradient over (tau0, beta)
    let c = &f.covariance;
    let var = g[0] * g[0] * c[1][1] + 2.0 * g[0] * g[1] * c[1][2] + g[1] * g[1] * c[2][2];
    (tau_bar, var.max(0.0).sqrt())
}

fn gamma_ratio(beta: f64) -> f64 {
    lanczos_gamma(2.0 / beta) / lanczos_gamma(1.0 / beta)
}

/// Relative quantum yield from a measured average lifetime:
/// eps_rel = k0 * tau_bar / 1000, clamped to 1 within the same tolerance
/// rule as the tunnelling-rate extraction.
pub fn qy_from_lifetime(tau_bar_ns: f64, k0_mhz: f64, tolerance_mhz: f64) -> Result<f64> {
    let kt = quench::tunnel_rate_from_lifetime(tau_bar_ns, k0_mhz, tolerance_mhz)?;
    Ok(quench::relative_qy(k0_mhz, kt))
}

/// Exact ensemble yield estimator: the mean of k0 / k_i over emitters.
///
/// This is the photon-count-based oracle the intensity-weighted estimator
/// is compared against.
pub fn amplitude_weighted_qy(rates: &[RateMhz], k0_mhz: f64, tolerance_mhz: f64) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::EmptySample);
    }
    for r in rates {
        if r.mhz() < k0_mhz - tolerance_mhz {
            return Err(Error::InvalidInput(format!(
                "emitter rate {} MHz lies below the k0 benchmark {} MHz beyond tolerance",
                r.mhz(),
                k0_mhz
            )));
        }
    }
    Ok(rates.iter().map(|r| k0_mhz / r.mhz()).sum::<f64>() / rates.len() as f64)
}
