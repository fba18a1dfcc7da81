//! Input builders shared by the benchmark targets.

use nvquench_core::lifetime::DecayHistogram;
use nvquench_core::quench::{QuenchParams, TunnellingSample};
use nvquench_core::simulate::{self, EnsembleSimConfig};
use nvquench_core::spatial;
use nvquench_core::spectra::{AxisKind, SpectrumSeries};

pub fn published_params() -> QuenchParams {
    QuenchParams::new(72.0, 185.0, 0.53).unwrap()
}

pub fn sim_config(ppm: f64, photons: u64, seed: u64) -> EnsembleSimConfig {
    let mut cfg = EnsembleSimConfig::new(spatial::ppm_to_density(ppm).unwrap(), seed);
    cfg.total_photons = photons;
    cfg
}

/// A realistic ensemble histogram to feed the fitting benchmarks.
pub fn ensemble_histogram(ppm: f64, photons: u64) -> DecayHistogram {
    simulate::simulate_ensemble_decay(&sim_config(ppm, photons, 99), &published_params()).unwrap()
}

/// Synthetic sample table over the measured concentration span.
pub fn sample_table(n: usize) -> Vec<TunnellingSample> {
    let p = published_params();
    (0..n)
        .map(|i| {
            let ppm = 2.0 * (380.0f64 / 2.0).powf(i as f64 / (n - 1) as f64);
            let rho = spatial::ppm_to_density(ppm).unwrap();
            let r = spatial::mean_nn_distance(rho).unwrap();
            let k = p.k0_mhz() + p.a_mhz() * (-p.alpha_per_nm() * r.nm()).exp();
            TunnellingSample {
                id: format!("s{i}"),
                rho_n_ppm: ppm,
                rho_n_err_ppm: 0.02 * ppm,
                tau_ns: 1000.0 / k,
                tau_err_ns: 10.0 / k,
            }
        })
        .collect()
}

/// Emission mixtures of two-peak templates for the unmixing benchmark.
pub fn emission_mixtures(count: usize) -> Vec<SpectrumSeries> {
    let axis: Vec<f64> = (0..=300).map(|i| 550.0 + i as f64).collect();
    let gauss = |x: f64, mu: f64, s: f64, amp: f64| amp * (-0.5 * ((x - mu) / s).powi(2)).exp();
    (0..count)
        .map(|i| {
            let f = 0.05 + 0.9 * i as f64 / (count - 1).max(1) as f64;
            let values: Vec<f64> = axis
                .iter()
                .map(|&w| {
                    let nv0 = gauss(w, 575.0, 4.0, 1.0) + gauss(w, 605.0, 22.0, 1.4);
                    let nvm = gauss(w, 638.0, 5.0, 0.8) + gauss(w, 695.0, 35.0, 1.8);
                    f * nv0 + (1.0 - f) * nvm
                })
                .collect();
            SpectrumSeries::new(
                AxisKind::WavelengthNm,
                axis.clone(),
                values,
                format!("m{i}"),
            )
            .unwrap()
        })
        .collect()
}
