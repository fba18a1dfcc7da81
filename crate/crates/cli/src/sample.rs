//! Per-sample record: measured primaries plus derived quantities. The
//! derived block is always recomputable from the primaries, and that is
//! asserted whenever records are loaded back in.

use serde::{Deserialize, Serialize};
use std::path::Path;

use nvquench_core::quench::{self, TunnellingSample};
use nvquench_core::spatial;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivedBlock {
    pub k_tunnel_mhz: f64,
    pub k_tunnel_err_mhz: f64,
    pub epsilon_rel: f64,
    pub epsilon_rel_err: f64,
    pub mean_distance_nm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub rho_n_ppm: f64,
    pub rho_n_err_ppm: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rho_nv_ppm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rho_nv_err_ppm: Option<f64>,
    pub tau_ns: f64,
    pub tau_err_ns: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub brightness_cps_per_uw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub brightness_err: Option<f64>,
    pub derived: DerivedBlock,
}

impl SampleRecord {
    pub fn primaries(&self) -> TunnellingSample {
        TunnellingSample {
            id: self.id.clone(),
            rho_n_ppm: self.rho_n_ppm,
            rho_n_err_ppm: self.rho_n_err_ppm,
            tau_ns: self.tau_ns,
            tau_err_ns: self.tau_err_ns,
        }
    }

    /// Recomputes the derived block from the primaries and checks the
    /// stored values agree within their stored uncertainties.
    pub fn validate_derived(&self, cfg: &RunConfig) -> CliResult<()> {
        let k0 = cfg.quench.k0_mhz;
        let rho = spatial::ppm_to_density_with(self.rho_n_ppm, cfg.carbon_site_density_per_nm3)
            .map_err(CliError::input)?;
        let r = spatial::mean_nn_distance(rho).map_err(CliError::input)?;
        let kt = quench::tunnel_rate_from_lifetime(self.tau_ns, k0, cfg.clamp_tolerance_mhz)
            .map_err(CliError::input)?;

        let checks = [
            (
                "k_tunnel_mhz",
                self.derived.k_tunnel_mhz,
                kt.mhz(),
                self.derived.k_tunnel_err_mhz,
            ),
            (
                "epsilon_rel",
                self.derived.epsilon_rel,
                quench::relative_qy(k0, kt),
                self.derived.epsilon_rel_err,
            ),
            (
                "mean_distance_nm",
                self.derived.mean_distance_nm,
                r.nm(),
                1e-6,
            ),
        ];
        for (name, stored, recomputed, tolerance) in checks {
            let tol = tolerance.max(1e-9 * recomputed.abs().max(1.0));
            if (stored - recomputed).abs() > tol {
                return Err(CliError::Input(format!(
                    "sample {}: stored {name} = {stored} disagrees with recomputed {recomputed} \
                     beyond its uncertainty {tol}",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Reads samples from a JSON record file, validating every derived block.
pub fn read_sample_records(path: &Path, cfg: &RunConfig) -> CliResult<Vec<TunnellingSample>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let records: Vec<SampleRecord> = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if records.is_empty() {
        return Err(CliError::Input(format!("{}: no samples", path.display())));
    }
    for record in &records {
        record.validate_derived(cfg)?;
    }
    Ok(records.iter().map(SampleRecord::primaries).collect())
}
