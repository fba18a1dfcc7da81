//! Run configuration: JSON file, environment fallback, built-in defaults.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use nvquench_core::quench::DEFAULT_CLAMP_TOLERANCE_MHZ;
use nvquench_core::QuenchParams;

use crate::error::{CliError, CliResult};

pub const CONFIG_ENV_VAR: &str = "NVQUENCH_CONFIG";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuenchSection {
    pub k0_mhz: f64,
    pub k0_err_mhz: f64,
    pub a_mhz: f64,
    pub a_err_mhz: f64,
    pub alpha_per_nm: f64,
    pub alpha_err_per_nm: f64,
}

impl Default for QuenchSection {
    fn default() -> Self {
        // Published best-fit constants.
        Self {
            k0_mhz: 72.0,
            k0_err_mhz: 0.4,
            a_mhz: 185.0,
            a_err_mhz: 87.0,
            alpha_per_nm: 0.53,
            alpha_err_per_nm: 0.12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n_emitters: usize,
    pub total_photons: u64,
    pub rep_period_ns: f64,
    pub bin_width_ns: f64,
    pub t_max_ns: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            n_emitters: 10_000,
            total_photons: 1_000_000,
            rep_period_ns: 100.0,
            bin_width_ns: 0.1,
            t_max_ns: 100.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub quench: QuenchSection,
    pub clamp_tolerance_mhz: f64,
    pub target_power_uw: f64,
    pub longpass_nm: f64,
    pub carbon_site_density_per_nm3: f64,
    /// NV- absorption cross-section at 532 nm, cm^2. Calibration input with
    /// no default; cite its source in the provenance string.
    pub sigma_nv_cm2: Option<f64>,
    pub sigma_nv_provenance: Option<String>,
    /// Proportionality constant of the visible calibration, ppm cm^3.
    pub rho_c_ppm_cm3: Option<f64>,
    pub rho_c_provenance: Option<String>,
    pub baseline_low_cm: (f64, f64),
    pub baseline_high_cm: (f64, f64),
    pub seed: u64,
    pub simulate: SimulateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            quench: QuenchSection::default(),
            clamp_tolerance_mhz: DEFAULT_CLAMP_TOLERANCE_MHZ,
            target_power_uw: 50.0,
            longpass_nm: 725.0,
            carbon_site_density_per_nm3: 176.0,
            sigma_nv_cm2: None,
            sigma_nv_provenance: None,
            rho_c_ppm_cm3: None,
            rho_c_provenance: None,
            baseline_low_cm: (1000.0, 1020.0),
            baseline_high_cm: (1380.0, 1400.0),
            seed: 1,
            simulate: SimulateSection::default(),
        }
    }
}

impl RunConfig {
    /// Loads the config from `--config`, then `NVQUENCH_CONFIG`, then the
    /// built-in defaults.
    pub fn load(explicit: Option<&Path>) -> CliResult<Self> {
        let path = explicit
            .map(|p| p.to_path_buf())
            .or_else(|| std::env::var(CONFIG_ENV_VAR).ok().map(Into::into));
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.quench_params()?;
        for (name, v) in [
            ("clamp_tolerance_mhz", self.clamp_tolerance_mhz),
            ("target_power_uw", self.target_power_uw),
            ("longpass_nm", self.longpass_nm),
            (
                "carbon_site_density_per_nm3",
                self.carbon_site_density_per_nm3,
            ),
        ] {
            if !(v > 0.0) {
                return Err(CliError::Input(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn quench_params(&self) -> CliResult<QuenchParams> {
        let q = &self.quench;
        QuenchParams::with_uncertainties(
            q.k0_mhz,
            q.k0_err_mhz,
            q.a_mhz,
            q.a_err_mhz,
            q.alpha_per_nm,
            q.alpha_err_per_nm,
        )
        .map_err(CliError::input)
    }

    /// SHA-256 over the effective configuration serialisation; recorded in
    /// every report's provenance block.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_published() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert!(cfg.quench_params().unwrap().matches_published());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let b = RunConfig::default();
        assert_eq!(a.sha256(), b.sha256());
        let c = RunConfig {
            seed: 99,
            ..Default::default()
        };
        assert_ne!(a.sha256(), c.sha256());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig {
            sigma_nv_cm2: Some(3.1e-21),
            sigma_nv_provenance: Some("vendor calibration sheet".into()),
            ..Default::default()
        };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg.sha256(), back.sha256());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r: Result<RunConfig, _> = serde_json::from_str(r#"{"sed": 1}"#);
        assert!(r.is_err());
    }
}
