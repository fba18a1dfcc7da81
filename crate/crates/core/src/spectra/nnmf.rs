//! Rank-2 non-negative matrix factorisation of emission spectra by
//! multiplicative updates, separating the NV0 and NV- components.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectra::{trapezoid, AxisKind, SpectrumSeries};

pub const NV0_ZPL_NM: f64 = 575.0;
pub const NVM_ZPL_NM: f64 = 638.0;

const MAX_ITERATIONS: usize = 5000;
const RESIDUAL_REL_TOL: f64 = 1e-8;
const DIV_GUARD: f64 = 1e-12;

/// Result of a rank-2 unmixing.
///
/// Components are normalised to unit area; the weights absorb the scale,
/// so `weights[s][0] + weights[s][1]` is spectrum `s`'s total area as
/// reconstructed. Index 0 is the NV0-like component, index 1 the NV--like
/// one, assigned by which component peaks nearer 575 nm vs 638 nm.
#[derive(Debug, Clone, Serialize)]
pub struct UnmixResult {
    pub components: [SpectrumSeries; 2],
    pub weights: Vec<[f64; 2]>,
    pub nv0_fraction: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Both components peaked in the same ZPL window; the labelling is a
    /// guess and downstream fractions are suspect.
    pub degenerate_separation: bool,
}

/// Resamples spectra onto the common overlap grid of the first spectrum by
/// linear interpolation. A data-prep step for [`nnmf_unmix`].
pub fn resample_to_common_grid(spectra: &[SpectrumSeries]) -> Result<Vec<SpectrumSeries>> {
    if spectra.len() < 2 {
        return Err(Error::InvalidSpectrum(
            "need at least 2 spectra to unmix".into(),
        ));
    }
    let lo = spectra
        .iter()
        .map(|s| s.axis_min())
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = spectra
        .iter()
        .map(|s| s.axis_max())
        .fold(f64::INFINITY, f64::min);
    if !(hi > lo) {
        return Err(Error::InvalidSpectrum(
            "spectra have no common axis overlap".into(),
        ));
    }
    let grid: Vec<f64> = spectra[0]
        .axis()
        .iter()
        .copied()
        .filter(|&x| x >= lo && x <= hi)
        .collect();
    if grid.len() < 8 {
        return Err(Error::InvalidSpectrum(
            "common overlap leaves too few grid points".into(),
        ));
    }
    spectra
        .iter()
        .map(|s| {
            let values: Vec<f64> = grid.iter().map(|&x| s.value_at(x)).collect::<Result<_>>()?;
            SpectrumSeries::new(s.axis_kind, grid.clone(), values, s.label.clone())
        })
        .collect()
}

/// Separates a set of emission spectra into two non-negative components by
/// Frobenius-norm multiplicative updates.
///
/// All spectra must share one wavelength grid (see
/// [`resample_to_common_grid`]) and be non-negative. The two components are
/// seeded with Gaussian templates at the 575/638 nm zero-phonon lines to
/// break permutation symmetry.
pub fn nnmf_unmix(spectra: &[SpectrumSeries]) -> Result<UnmixResult> {
    if spectra.len() < 2 {
        return Err(Error::InvalidSpectrum(
            "need at least 2 spectra to unmix".into(),
        ));
    }
    let axis = spectra[0].axis().to_vec();
    for s in spectra {
        if s.axis_kind != AxisKind::WavelengthNm {
            return Err(Error::InvalidSpectrum(
                "unmixing needs wavelength-axis emission spectra".into(),
            ));
        }
        if s.axis() != axis.as_slice() {
            return Err(Error::InvalidSpectrum(
                "spectra are not on a common wavelength grid".into(),
            ));
        }
        if s.values().iter().any(|&v| v < 0.0) {
            return Err(Error::NegativeValues);
        }
    }

    let m = spectra.len();
    let n = axis.len();
    let v = DMatrix::from_fn(m, n, |i, j| spectra[i].values()[j]);
    let v_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();

    // Template seeding: Gaussians on the ZPLs plus a floor so no entry
    // starts pinned at zero.
    let mut h = DMatrix::from_fn(2, n, |i, j| {
        let center = if i == 0 { NV0_ZPL_NM } else { NVM_ZPL_NM };
        let z = (axis[j] - center) / 10.0;
        (-0.5 * z * z).exp() + 1e-3
    });
    let row_mean = v.sum() / (m * n) as f64;
    let mut w = DMatrix::from_element(m, 2, row_mean.max(DIV_GUARD));

    let mut residual = (&v - &w * &h).norm();
    let mut iterations = 0;
    for it in 1..=MAX_ITERATIONS {
        iterations = it;

        // W <- W .* (V H^T) ./ (W H H^T)
        let vht = &v * h.transpose();
        let whht = &w * (&h * h.transpose());
        w.zip_zip_apply(&vht, &whht, |wi, a, b| *wi *= a / (b + DIV_GUARD));

        // H <- H .* (W^T V) ./ (W^T W H)
        let wtv = w.transpose() * &v;
        let wtwh = (w.transpose() * &w) * &h;
        h.zip_zip_apply(&wtv, &wtwh, |hi, a, b| *hi *= a / (b + DIV_GUARD));

        let next = (&v - &w * &h).norm();
        // Multiplicative updates never increase the Frobenius objective.
        debug_assert!(
            next <= residual * (1.0 + 1e-9) + 1e-12,
            "objective increased at iteration {it}: {residual} -> {next}"
        );
        let done = (residual - next).abs() <= RESIDUAL_REL_TOL * residual.max(DIV_GUARD);
        residual = next;
        if done {
            break;
        }
    }

    // Unit-area components; weights absorb the scale.
    let mut comp_rows = [vec![0.0; n], vec![0.0; n]];
    let mut areas = [0.0f64; 2];
    for c in 0..2 {
        for j in 0..n {
            comp_rows[c][j] = h[(c, j)];
        }
        areas[c] = trapezoid(&axis, &comp_rows[c]);
        if areas[c] <= 0.0 {
            return Err(Error::DegenerateFit("an unmixed component vanished".into()));
        }
        for val in comp_rows[c].iter_mut() {
            *val /= areas[c];
        }
    }

    // Identity by peak position relative to the two ZPLs.
    let peak = |row: &[f64]| {
        let mut best = 0;
        for (j, &val) in row.iter().enumerate() {
            if val > row[best] {
                best = j;
            }
        }
        axis[best]
    };
    let peaks = [peak(&comp_rows[0]), peak(&comp_rows[1])];
    let is_nv0 = |p: f64| (p - NV0_ZPL_NM).abs() < (p - NVM_ZPL_NM).abs();
    let degenerate = is_nv0(peaks[0]) == is_nv0(peaks[1]);
    let nv0_idx = if degenerate {
        // both in one window: call the shorter-wavelength one NV0
        if peaks[0] <= peaks[1] {
            0
        } else {
            1
        }
    } else if is_nv0(peaks[0]) {
        0
    } else {
        1
    };
    let nvm_idx = 1 - nv0_idx;

    let mut weights = Vec::with_capacity(m);
    let mut fractions = Vec::with_capacity(m);
    for i in 0..m {
        let w0 = w[(i, nv0_idx)] * areas[nv0_idx];
        let w1 = w[(i, nvm_idx)] * areas[nvm_idx];
        weights.push([w0, w1]);
        let total = w0 + w1;
        fractions.push(if total > 0.0 { w0 / total } else { 0.0 });
    }

    let [row_a, row_b] = comp_rows;
    let (row0, row1) = if nv0_idx == 0 {
        (row_a, row_b)
    } else {
        (row_b, row_a)
    };
    let components = [
        SpectrumSeries::new(AxisKind::WavelengthNm, axis.clone(), row0, "nv0")?,
        SpectrumSeries::new(AxisKind::WavelengthNm, axis, row1, "nvm")?,
    ];

    Ok(UnmixResult {
        components,
        weights,
        nv0_fraction: fractions,
        residual_norm: residual / v_norm.max(DIV_GUARD),
        iterations,
        degenerate_separation: degenerate,
    })
}

/// Recomputes the per-spectrum NV0 weight share using only the emission at
/// wavelengths at or above `longpass_nm`, mirroring a long-pass filter in
/// the collection path.
pub fn nv0_fraction_filtered(u: &UnmixResult, longpass_nm: f64) -> Result<Vec<f64>> {
    let axis = u.components[0].axis();
    if longpass_nm > *axis.last().unwrap() || longpass_nm < axis[0] {
        return Err(Error::AxisOutOfRange {
            needed: longpass_nm,
            min: axis[0],
            max: *axis.last().unwrap(),
        });
    }
    let masses: Vec<f64> = u
        .components
        .iter()
        .map(|c| {
            let pts: Vec<(f64, f64)> = c
                .axis()
                .iter()
                .zip(c.values())
                .filter(|(&a, _)| a >= longpass_nm)
                .map(|(&a, &v)| (a, v))
                .collect();
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            trapezoid(&xs, &ys)
        })
        .collect();

    Ok(u.weights
        .iter()
        .map(|w| {
            let m0 = w[0] * masses[0];
            let m1 = w[1] * masses[1];
            let total = m0 + m1;
            if total > 0.0 {
                m0 / total
            } else {
                0.0
            }
        })
        .collect())
}
