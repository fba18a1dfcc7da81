//! Ensemble-magnetometry sensitivity figure of merit:
//! eta is proportional to 1 / sqrt(eps * N * T2), so only ratios between
//! operating points are meaningful.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quench::{relative_qy_model, QuenchParams};
use crate::spatial::NumberDensity;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SensitivityInput {
    pub epsilon_rel: f64,
    pub n_emitters: f64,
    pub t2_us: f64,
}

impl SensitivityInput {
    pub fn new(epsilon_rel: f64, n_emitters: f64, t2_us: f64) -> Result<Self> {
        for (name, v) in [
            ("epsilon_rel", epsilon_rel),
            ("n_emitters", n_emitters),
            ("t2_us", t2_us),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self {
            epsilon_rel,
            n_emitters,
            t2_us,
        })
    }

    fn figure(&self) -> f64 {
        self.epsilon_rel * self.n_emitters * self.t2_us
    }
}

/// eta_a / eta_b = sqrt((eps N T2)_b / (eps N T2)_a). Values below 1 mean
/// `a` is the more sensitive operating point.
pub fn relative_sensitivity(a: &SensitivityInput, b: &SensitivityInput) -> f64 {
    (b.figure() / a.figure()).sqrt()
}

/// One row of a sensitivity-vs-density table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SensitivityRow {
    pub density_per_nm3: f64,
    pub epsilon_rel: f64,
    pub n_emitters: f64,
    pub t2_us: f64,
    /// eta at this density relative to the first row.
    pub relative_eta: f64,
}

/// Tabulates yield, emitter count, coherence time and relative sensitivity
/// over a density sweep. `n_of_density` and `t2_of_density` must be defined
/// (return `Some`) on every requested density.
pub fn sensitivity_vs_density(
    p: &QuenchParams,
    n_of_density: impl Fn(f64) -> Option<f64>,
    t2_of_density: impl Fn(f64) -> Option<f64>,
    densities: &[NumberDensity],
) -> Result<Vec<SensitivityRow>> {
    let mut rows: Vec<SensitivityRow> = Vec::with_capacity(densities.len());
    let mut first: Option<SensitivityInput> = None;
    for &d in densities {
        let rho = d.per_nm3();
        let n = n_of_density(rho).ok_or_else(|| {
            Error::InvalidInput(format!("emitter-count mapping undefined at {rho} nm^-3"))
        })?;
        let t2 = t2_of_density(rho)
            .ok_or_else(|| Error::InvalidInput(format!("T2 mapping undefined at {rho} nm^-3")))?;
        let eps = relative_qy_model(p, d);
        let input = SensitivityInput::new(eps, n, t2)?;
        let reference = *first.get_or_insert(input);
        rows.push(SensitivityRow {
            density_per_nm3: rho,
            epsilon_rel: eps,
            n_emitters: n,
            t2_us: t2,
            relative_eta: relative_sensitivity(&input, &reference),
        });
    }
    Ok(rows)
}
