//! Concentration calibration from absorption spectra, NV0/NV- emission
//! unmixing, and brightness extraction.

mod nnmf;

pub use nnmf::{nnmf_unmix, nv0_fraction_filtered, resample_to_common_grid, UnmixResult};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numopt;

/// Calibration coefficient of the 1130 cm^-1 nitrogen band: ppm per cm^-1.
pub const FTIR_N_COEFF_PPM_PER_CM: f64 = 25.0;
pub const FTIR_N_COEFF_ERR: f64 = 2.0;

/// Default flank windows (cm^-1) anchoring the linear FTIR baseline.
pub const DEFAULT_BASELINE_LOW_CM: (f64, f64) = (1000.0, 1020.0);
pub const DEFAULT_BASELINE_HIGH_CM: (f64, f64) = (1380.0, 1400.0);

const FTIR_N_BAND_CM: f64 = 1130.0;
const VIS_NV_BAND_NM: f64 = 532.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AxisKind {
    WavelengthNm,
    WavenumberPerCm,
}

/// An absorption or emission spectrum on a strictly monotone axis.
///
/// Axes given in descending order are reversed on construction so the
/// stored axis always increases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSeries {
    pub axis_kind: AxisKind,
    axis: Vec<f64>,
    values: Vec<f64>,
    pub label: String,
}

impl SpectrumSeries {
    pub fn new(
        axis_kind: AxisKind,
        mut axis: Vec<f64>,
        mut values: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if axis.len() != values.len() {
            return Err(Error::InvalidSpectrum(format!(
                "axis has {} points, values {}",
                axis.len(),
                values.len()
            )));
        }
        if axis.len() < 2 {
            return Err(Error::InvalidSpectrum("need at least 2 points".into()));
        }
        if axis.iter().any(|v| !v.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpectrum("non-finite entries".into()));
        }
        if axis.windows(2).all(|w| w[1] < w[0]) {
            axis.reverse();
            values.reverse();
        } else if !axis.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidSpectrum(
                "axis must be strictly monotone".into(),
            ));
        }
        Ok(Self {
            axis_kind,
            axis,
            values,
            label: label.into(),
        })
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn axis_min(&self) -> f64 {
        self.axis[0]
    }

    pub fn axis_max(&self) -> f64 {
        *self.axis.last().unwrap()
    }

    /// Linear interpolation at `x`; out-of-range is an error.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        if x < self.axis_min() || x > self.axis_max() {
            return Err(Error::AxisOutOfRange {
                needed: x,
                min: self.axis_min(),
                max: self.axis_max(),
            });
        }
        let i = match self.axis.partition_point(|&a| a <= x) {
            0 => 0,
            p if p >= self.axis.len() => self.axis.len() - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.axis[i], self.axis[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let t = (x - x0) / (x1 - x0);
        Ok(y0 + t * (y1 - y0))
    }

    /// Trapezoidal integral over the whole axis.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.axis, &self.values)
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Flank windows anchoring the linear baseline under the 1130 cm^-1 band.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BaselineWindows {
    pub low_cm: (f64, f64),
    pub high_cm: (f64, f64),
}

impl Default for BaselineWindows {
    fn default() -> Self {
        Self {
            low_cm: DEFAULT_BASELINE_LOW_CM,
            high_cm: DEFAULT_BASELINE_HIGH_CM,
        }
    }
}

/// Substitutional nitrogen concentration from an FTIR absorption spectrum:
/// rho_N [ppm] = 25(2) * mu_1130 [cm^-1], with mu_1130 measured above a
/// linear baseline fitted through the flank windows.
///
/// Returns the concentration and its one-sigma uncertainty, which combines
/// the calibration coefficient error with the baseline noise.
pub fn n_concentration_from_ftir(
    s: &SpectrumSeries,
    windows: &BaselineWindows,
) -> Result<(f64, f64)> {
    if s.axis_kind != AxisKind::WavenumberPerCm {
        return Err(Error::InvalidSpectrum(
            "FTIR calibration needs a wavenumber axis".into(),
        ));
    }
    let raw_peak = s.value_at(FTIR_N_BAND_CM)?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for win in [windows.low_cm, windows.high_cm] {
        let before = xs.len();
        for (&a, &v) in s.axis().iter().zip(s.values()) {
            if a >= win.0 && a <= win.1 {
                xs.push(a);
                ys.push(v);
            }
        }
        if xs.len() == before {
            return Err(Error::InvalidSpectrum(format!(
                "no axis points inside the baseline window {}..{} cm^-1",
                win.0, win.1
            )));
        }
    }

    let fit = numopt::fit_linear(&xs, &ys)?;
    let (slope, intercept) = (fit.parameters[0], fit.parameters[1]);
    let baseline = slope * FTIR_N_BAND_CM + intercept;
    let mu = (raw_peak - baseline).max(0.0);

    // Prediction variance of the baseline at the band, plus the residual
    // scatter of flank points about the fitted line.
    let c = &fit.covariance;
    let var_pred =
        c[1][1] + FTIR_N_BAND_CM * FTIR_N_BAND_CM * c[0][0] + 2.0 * FTIR_N_BAND_CM * c[0][1];
    let sigma_mu = (var_pred + fit.reduced_chi2).max(0.0).sqrt();

    let ppm = FTIR_N_COEFF_PPM_PER_CM * mu;
    let err = (FTIR_N_COEFF_ERR * mu).hypot(FTIR_N_COEFF_PPM_PER_CM * sigma_mu);
    Ok((ppm, err))
}

/// NV- concentration from the visible absorption coefficient at 532 nm:
/// rho_NV [ppm] = rho_C [ppm cm^3] * mu_532 [cm^-1] / sigma_NV [cm^2].
///
/// The cross-section and proportionality constant are calibration inputs;
/// no default is baked in.
pub fn nv_concentration_from_vis(
    s: &SpectrumSeries,
    sigma_nv_cm2: f64,
    rho_c_ppm_cm3: f64,
) -> Result<f64> {
    if s.axis_kind != AxisKind::WavelengthNm {
        return Err(Error::InvalidSpectrum(
            "visible calibration needs a wavelength axis".into(),
        ));
    }
    if !(sigma_nv_cm2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sigma_NV must be positive, got {sigma_nv_cm2}"
        )));
    }
    if !(rho_c_ppm_cm3 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "rho_C must be positive, got {rho_c_ppm_cm3}"
        )));
    }
    let mu = s.value_at(VIS_NV_BAND_NM)?;
    Ok(rho_c_ppm_cm3 * mu / sigma_nv_cm2)
}

/// Brightness as the below-saturation slope of emission intensity vs
/// excitation power, in counts/s/uW. Returns the slope and its standard
/// error.
pub fn brightness_fit(powers_uw: &[f64], intensities: &[f64]) -> Result<(f64, f64)> {
    if powers_uw.len() < 3 {
        return Err(Error::InvalidFitInput(format!(
            "need at least 3 power points, got {}",
            powers_uw.len()
        )));
    }
    let fit = numopt::fit_linear(powers_uw, intensities)?;
    Ok((fit.parameters[0], fit.std_errors()[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_spectrum_with_band(offset: f64, mu: f64) -> SpectrumSeries {
        let axis: Vec<f64> = (0..=500).map(|i| 950.0 + i as f64).collect();
        let values: Vec<f64> = axis
            .iter()
            .map(|&w| {
                // triangular band centred on 1130, 60 cm^-1 wide
                let d = (w - 1130.0f64).abs();
                offset + if d < 30.0 { mu * (1.0 - d / 30.0) } else { 0.0 }
            })
            .collect();
        SpectrumSeries::new(AxisKind::WavenumberPerCm, axis, values, "ftir").unwrap()
    }

    #[test]
    fn ftir_calibration_anchor() {
        let s = flat_spectrum_with_band(0.0, 4.0);
        let (ppm, err) = n_concentration_from_ftir(&s, &BaselineWindows::default()).unwrap();
        assert!((ppm - 100.0).abs() < 1e-9, "got {ppm}");
        assert!((err - 8.0).abs() < 1e-9, "got {err}");
    }

    #[test]
    fn ftir_zero_spectrum() {
        let s = flat_spectrum_with_band(0.0, 0.0);
        let (ppm, _) = n_concentration_from_ftir(&s, &BaselineWindows::default()).unwrap();
        assert_eq!(ppm, 0.0);
    }

    #[test]
    fn ftir_offset_invariance() {
        let a = n_concentration_from_ftir(
            &flat_spectrum_with_band(0.0, 4.0),
            &BaselineWindows::default(),
        )
        .unwrap();
        let b = n_concentration_from_ftir(
            &flat_spectrum_with_band(7.3, 4.0),
            &BaselineWindows::default(),
        )
        .unwrap();
        assert!((a.0 - b.0).abs() < 1e-9);
        assert!((a.1 - b.1).abs() < 1e-9);
    }

    #[test]
    fn ftir_linear_in_peak_value() {
        let windows = BaselineWindows::default();
        let one = n_concentration_from_ftir(&flat_spectrum_with_band(0.0, 1.0), &windows)
            .unwrap()
            .0;
        let five = n_concentration_from_ftir(&flat_spectrum_with_band(0.0, 5.0), &windows)
            .unwrap()
            .0;
        assert!((five - 5.0 * one).abs() < 1e-9);
    }

    #[test]
    fn ftir_requires_band_coverage() {
        let axis: Vec<f64> = (0..=100).map(|i| 2000.0 + i as f64).collect();
        let values = vec![0.0; axis.len()];
        let s = SpectrumSeries::new(AxisKind::WavenumberPerCm, axis, values, "off").unwrap();
        assert!(matches!(
            n_concentration_from_ftir(&s, &BaselineWindows::default()),
            Err(Error::AxisOutOfRange { .. })
        ));
    }

    #[test]
    fn vis_calibration_is_linear_in_mu() {
        let axis: Vec<f64> = (0..=200).map(|i| 450.0 + i as f64).collect();
        let mk = |scale: f64| {
            let values: Vec<f64> = axis.iter().map(|&_w| scale * 2.0).collect();
            SpectrumSeries::new(AxisKind::WavelengthNm, axis.clone(), values, "vis").unwrap()
        };
        // sigma_NV and rho_C chosen so the reference sample returns 4.13 ppm.
        let sigma_nv = 3.1e-18;
        let rho_c = 4.13 * sigma_nv / 2.0;
        let full = nv_concentration_from_vis(&mk(1.0), sigma_nv, rho_c).unwrap();
        assert!((full - 4.13).abs() < 1e-9);
        let half = nv_concentration_from_vis(&mk(0.5), sigma_nv, rho_c).unwrap();
        assert!((half - 2.065).abs() < 1e-9);
        let zero = nv_concentration_from_vis(&mk(0.0), sigma_nv, rho_c).unwrap();
        assert_eq!(zero, 0.0);
        assert!(nv_concentration_from_vis(&mk(1.0), 0.0, rho_c).is_err());
    }

    #[test]
    fn brightness_fit_examples() {
        let (slope, _) = brightness_fit(&[10.0, 20.0, 30.0], &[100.0, 200.0, 300.0]).unwrap();
        assert!((slope - 10.0).abs() < 1e-10);
        // permutation invariance
        let (slope_p, _) = brightness_fit(&[30.0, 10.0, 20.0], &[300.0, 100.0, 200.0]).unwrap();
        assert!((slope - slope_p).abs() < 1e-12);
        assert!(brightness_fit(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(brightness_fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn descending_axis_is_normalised() {
        let s = SpectrumSeries::new(
            AxisKind::WavenumberPerCm,
            vec![1400.0, 1200.0, 1000.0],
            vec![3.0, 2.0, 1.0],
            "desc",
        )
        .unwrap();
        assert_eq!(s.axis(), &[1000.0, 1200.0, 1400.0]);
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert!((s.value_at(1300.0).unwrap() - 2.5).abs() < 1e-12);
    }
}
