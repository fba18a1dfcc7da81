//! Command implementations: thin orchestration around the core library.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use nvquench_core::error::Error as CoreError;
use nvquench_core::lifetime::{self, StretchedExpFit};
use nvquench_core::quench::{self, QuenchParams};
use nvquench_core::sensitivity::{self, SensitivityInput};
use nvquench_core::simulate::{self, EnsembleSimConfig};
use nvquench_core::spatial::{self, NumberDensity};
use nvquench_core::spectra::{self, BaselineWindows};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats;
use crate::report::{emit, report, write_text};
use crate::sample::{DerivedBlock, SampleRecord};

/// Maps core errors onto the exit-code contract: malformed or out-of-domain
/// inputs exit 2, failures arising inside the numerics exit 1.
pub fn classify(e: CoreError) -> CliError {
    match e {
        CoreError::RankDeficient
        | CoreError::DegenerateFit(_)
        | CoreError::UnreachableYield { .. }
        | CoreError::InconsistentLifetime { .. }
        | CoreError::ZeroTotalRate(_) => CliError::numeric(e),
        _ => CliError::input(e),
    }
}

fn fit_to_json(fit: &StretchedExpFit) -> serde_json::Value {
    json!({
        "i0": fit.i0,
        "tau0_ns": fit.tau0_ns,
        "tau0_err_ns": fit.tau0_err_ns(),
        "beta": fit.beta,
        "beta_err": fit.beta_err(),
        "background": fit.background,
        "covariance": fit.covariance,
        "reduced_chi2": fit.reduced_chi2,
        "iterations": fit.iterations,
        "converged": fit.converged,
    })
}

pub fn fit_decay(paths: &[PathBuf], cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    if paths.is_empty() {
        return Err(CliError::Input("no histogram files given".into()));
    }
    let k0 = cfg.quench.k0_mhz;
    let k0_err = cfg.quench.k0_err_mhz;

    let mut entries = Vec::new();
    let mut taus = Vec::new();
    for path in paths {
        let file = formats::read_histogram(path)?;
        let fit = lifetime::fit_stretched_exp(&file.histogram).map_err(classify)?;
        if !fit.converged {
            return Err(CliError::Numeric(format!(
                "{}: stretched-exponential fit did not converge",
                path.display()
            )));
        }
        let (tau_bar, tau_bar_err) = lifetime::average_lifetime(&fit);
        let k_tunnel = quench::tunnel_rate_from_lifetime(tau_bar, k0, cfg.clamp_tolerance_mhz)
            .map_err(classify)?;
        let k_tunnel_err = (1000.0 * tau_bar_err / (tau_bar * tau_bar)).hypot(k0_err);
        let epsilon = quench::relative_qy(k0, k_tunnel);
        let epsilon_err = quench::relative_qy_uncertainty(k0, k0_err, k_tunnel, k_tunnel_err);
        taus.push(tau_bar);
        entries.push(json!({
            "file": path.display().to_string(),
            "power_uw": file.power_uw,
            "fit": fit_to_json(&fit),
            "tau_bar_ns": tau_bar,
            "tau_bar_err_ns": tau_bar_err,
            "k_tunnel_mhz": k_tunnel.mhz(),
            "k_tunnel_err_mhz": k_tunnel_err,
            "epsilon_rel": epsilon,
            "epsilon_rel_err": epsilon_err,
        }));
    }

    // With a power series, report the measurement nearest the target power;
    // otherwise the first file stands.
    let selected = entries
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e["power_uw"].as_f64().map(|p| (i, p)))
        .min_by(|a, b| {
            (a.1 - cfg.target_power_uw)
                .abs()
                .total_cmp(&(b.1 - cfg.target_power_uw).abs())
        })
        .map(|(i, _)| i)
        .unwrap_or(0);

    let mut body = json!({
        "measurements": entries,
        "selected_index": selected,
        "target_power_uw": cfg.target_power_uw,
    });
    if taus.len() > 1 {
        // Area-to-area spread, reported alongside the per-fit sigma.
        let max = taus.iter().fold(f64::MIN, |a, &b| a.max(b));
        let min = taus.iter().fold(f64::MAX, |a, &b| a.min(b));
        body["tau_bar_semi_dispersion_ns"] = json!((max - min) / 2.0);
    }
    emit(&report("fit-decay", cfg, None, body), out)
}

pub fn simulate_cmd(density_ppm: f64, cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let density = spatial::ppm_to_density_with(density_ppm, cfg.carbon_site_density_per_nm3)
        .map_err(classify)?;
    let sim = EnsembleSimConfig {
        density,
        n_emitters: cfg.simulate.n_emitters,
        total_photons: cfg.simulate.total_photons,
        rep_period_ns: cfg.simulate.rep_period_ns,
        bin_width_ns: cfg.simulate.bin_width_ns,
        t_max_ns: cfg.simulate.t_max_ns,
        seed: cfg.seed,
    };
    let params = cfg.quench_params()?;
    let histogram = simulate::simulate_ensemble_decay(&sim, &params).map_err(classify)?;
    let csv = formats::write_histogram(&histogram, None);
    write_text(&csv, out)?;

    if let Some(path) = out {
        let body = report(
            "simulate",
            cfg,
            Some(cfg.seed),
            json!({
                "density_ppm": density_ppm,
                "density_per_nm3": density.per_nm3(),
                "config": sim,
                "quench_params": params,
                "total_counts": histogram.total_counts(),
                "histogram_file": path.display().to_string(),
            }),
        );
        let sidecar = path.with_extension("provenance.json");
        emit(&body, Some(&sidecar))?;
    }
    Ok(())
}

pub fn fit_tunnelling(
    table: &Path,
    cfg: &RunConfig,
    out: Option<&Path>,
    curve_out: Option<&Path>,
) -> CliResult<()> {
    let samples = if table.extension().is_some_and(|e| e == "json") {
        crate::sample::read_sample_records(table, cfg)?
    } else {
        formats::read_sample_table(table)?
    };

    let fit = quench::fit_tunnelling_curve(
        &samples,
        cfg.quench.k0_mhz,
        cfg.quench.k0_err_mhz,
        cfg.clamp_tolerance_mhz,
        cfg.carbon_site_density_per_nm3,
    )
    .map_err(classify)?;
    if !fit.converged {
        return Err(CliError::Numeric(
            "tunnelling-rate fit did not converge".into(),
        ));
    }

    let records: Vec<SampleRecord> = samples
        .iter()
        .zip(&fit.samples)
        .map(|(s, d)| SampleRecord {
            id: s.id.clone(),
            rho_n_ppm: s.rho_n_ppm,
            rho_n_err_ppm: s.rho_n_err_ppm,
            rho_nv_ppm: None,
            rho_nv_err_ppm: None,
            tau_ns: s.tau_ns,
            tau_err_ns: s.tau_err_ns,
            brightness_cps_per_uw: None,
            brightness_err: None,
            derived: DerivedBlock {
                k_tunnel_mhz: d.k_tunnel_mhz,
                k_tunnel_err_mhz: d.k_tunnel_err_mhz,
                epsilon_rel: d.epsilon_rel,
                epsilon_rel_err: d.epsilon_rel_err,
                mean_distance_nm: d.mean_distance_nm,
            },
        })
        .collect();

    // Dense yield-vs-concentration curve from the fitted constants.
    let fitted = QuenchParams::from_alpha_rho(cfg.quench.k0_mhz, fit.a_mhz, fit.alpha_rho_per_nm)
        .map_err(classify)?;
    let curve_path = curve_out
        .map(Path::to_path_buf)
        .or_else(|| out.map(|p| p.with_extension("curve.csv")));
    if let Some(curve_path) = &curve_path {
        let mut csv = String::from("rho_ppm,epsilon_rel\n");
        let n = 250;
        for i in 0..n {
            let log_ppm = -0.5 + 3.5 * i as f64 / (n - 1) as f64; // 0.316 .. 1000 ppm
            let ppm = 10f64.powf(log_ppm);
            let d = spatial::ppm_to_density_with(ppm, cfg.carbon_site_density_per_nm3)
                .map_err(classify)?;
            let _ = writeln!(csv, "{ppm},{}", quench::relative_qy_model(&fitted, d));
        }
        write_text(&csv, Some(curve_path))?;
    }

    let body = json!({
        "fit": {
            "a_mhz": fit.a_mhz,
            "a_err_mhz": fit.a_err_mhz,
            "alpha_per_nm": fit.alpha_per_nm,
            "alpha_err_per_nm": fit.alpha_err_per_nm,
            "alpha_rho_per_nm": fit.alpha_rho_per_nm,
            "alpha_rho_err_per_nm": fit.alpha_rho_err_per_nm,
            "covariance": fit.covariance,
            "reduced_chi2": fit.reduced_chi2,
        },
        "k0_mhz": cfg.quench.k0_mhz,
        "samples": records,
        "curve_file": curve_path.as_ref().map(|p| p.display().to_string()),
    });
    emit(&report("fit-tunnelling", cfg, None, body), out)
}

pub fn predict_qy(density_ppm: f64, cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let params = cfg.quench_params()?;
    let d = spatial::ppm_to_density_with(density_ppm, cfg.carbon_site_density_per_nm3)
        .map_err(classify)?;
    let epsilon = quench::relative_qy_model(&params, d);
    let epsilon_err = quench::relative_qy_model_uncertainty(&params, d);
    let mean_distance = if d.is_zero() {
        None
    } else {
        Some(spatial::mean_nn_distance(d).map_err(classify)?.nm())
    };
    let notes: Vec<&str> = quench::discrepancy_note(&params).into_iter().collect();
    let body = json!({
        "density_ppm": density_ppm,
        "density_per_nm3": d.per_nm3(),
        "epsilon_rel": epsilon,
        "epsilon_rel_err": epsilon_err,
        "mean_nn_distance_nm": mean_distance,
        "model_k_tunnel_mhz": if d.is_zero() { 0.0 } else { quench::model_tunnel_rate(&params, d) },
        "notes": notes,
    });
    emit(&report("predict-qy", cfg, None, body), out)
}

pub fn max_nitrogen(target: f64, cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let params = cfg.quench_params()?;
    let d = quench::max_density_for_qy(&params, target).map_err(classify)?;
    let ppm = spatial::density_to_ppm_with(d, cfg.carbon_site_density_per_nm3);
    let notes: Vec<&str> = quench::discrepancy_note(&params).into_iter().collect();
    let body = json!({
        "target_epsilon_rel": target,
        "max_density_per_nm3": d.per_nm3(),
        "max_density_ppm": ppm,
        "notes": notes,
    });
    emit(&report("max-nitrogen", cfg, None, body), out)
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SpectrumKind {
    Ftir,
    Vis,
}

pub fn concentration(
    path: &Path,
    kind: SpectrumKind,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> CliResult<()> {
    let spectrum = formats::read_spectrum(path)?;
    let body = match kind {
        SpectrumKind::Ftir => {
            let windows = BaselineWindows {
                low_cm: cfg.baseline_low_cm,
                high_cm: cfg.baseline_high_cm,
            };
            let (ppm, err) =
                spectra::n_concentration_from_ftir(&spectrum, &windows).map_err(classify)?;
            json!({
                "kind": "ftir",
                "rho_n_ppm": ppm,
                "rho_n_err_ppm": err,
                "baseline_windows_cm": windows,
                "file": path.display().to_string(),
            })
        }
        SpectrumKind::Vis => {
            let sigma_nv = cfg.sigma_nv_cm2.ok_or_else(|| {
                CliError::Input(
                    "visible calibration needs `sigma_nv_cm2` in the config (no default is \
                     baked in; record its source in `sigma_nv_provenance`)"
                        .into(),
                )
            })?;
            let rho_c = cfg.rho_c_ppm_cm3.ok_or_else(|| {
                CliError::Input(
                    "visible calibration needs `rho_c_ppm_cm3` in the config (no default is \
                     baked in; record its source in `rho_c_provenance`)"
                        .into(),
                )
            })?;
            let ppm =
                spectra::nv_concentration_from_vis(&spectrum, sigma_nv, rho_c).map_err(classify)?;
            json!({
                "kind": "vis",
                "rho_nv_ppm": ppm,
                "sigma_nv_cm2": sigma_nv,
                "sigma_nv_provenance": cfg.sigma_nv_provenance,
                "rho_c_ppm_cm3": rho_c,
                "rho_c_provenance": cfg.rho_c_provenance,
                "file": path.display().to_string(),
            })
        }
    };
    emit(&report("concentration", cfg, None, body), out)
}

pub fn unmix(
    paths: &[PathBuf],
    cfg: &RunConfig,
    out: Option<&Path>,
    components_out: Option<&Path>,
) -> CliResult<()> {
    if paths.len() < 2 {
        return Err(CliError::Input(format!(
            "unmixing needs at least 2 spectra, got {}",
            paths.len()
        )));
    }
    let spectra_in: Vec<_> = paths
        .iter()
        .map(|p| formats::read_spectrum(p))
        .collect::<CliResult<_>>()?;
    let common = spectra::resample_to_common_grid(&spectra_in).map_err(classify)?;
    let unmixed = spectra::nnmf_unmix(&common).map_err(classify)?;
    let filtered = spectra::nv0_fraction_filtered(&unmixed, cfg.longpass_nm).map_err(classify)?;

    let components_path = components_out
        .map(Path::to_path_buf)
        .or_else(|| out.map(|p| p.with_extension("components.csv")));
    if let Some(path) = &components_path {
        let mut csv = String::from("wavelength_nm,nv0,nvm\n");
        let axis = unmixed.components[0].axis();
        for (i, &w) in axis.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{w},{},{}",
                unmixed.components[0].values()[i],
                unmixed.components[1].values()[i]
            );
        }
        write_text(&csv, Some(path))?;
    }

    let body = json!({
        "files": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "nv0_fraction": unmixed.nv0_fraction,
        "nv0_fraction_filtered": filtered,
        "longpass_nm": cfg.longpass_nm,
        "weights": unmixed.weights,
        "residual_norm": unmixed.residual_norm,
        "iterations": unmixed.iterations,
        "degenerate_separation": unmixed.degenerate_separation,
        "components_file": components_path.as_ref().map(|p| p.display().to_string()),
    });
    emit(&report("unmix", cfg, None, body), out)
}

pub fn brightness(path: &Path, cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let (powers, intensities) = formats::read_power_table(path)?;
    let (slope, slope_err) = spectra::brightness_fit(&powers, &intensities).map_err(classify)?;
    let body = json!({
        "file": path.display().to_string(),
        "brightness_cps_per_uw": slope,
        "brightness_err": slope_err,
        "points": powers.len(),
    });
    emit(&report("brightness", cfg, None, body), out)
}

/// Mapping spec for N(density) and T2(density):
/// `constant:VALUE`, `proportional:COEFF` (value = COEFF * ppm),
/// `powerlaw:COEFF,EXPONENT` (value = COEFF * ppm^EXPONENT) or
/// `table:FILE` (columns density_ppm,VALUE; linear interpolation).
#[derive(Clone)]
pub enum DensityMapping {
    Constant(f64),
    Proportional(f64),
    PowerLaw(f64, f64),
    Table(Vec<(f64, f64)>),
}

impl DensityMapping {
    pub fn parse(spec: &str) -> CliResult<Self> {
        let (kind, arg) = spec.split_once(':').ok_or_else(|| {
            CliError::Input(format!(
                "mapping `{spec}` is not of the form kind:args \
                 (constant:X, proportional:C, powerlaw:C,P or table:FILE)"
            ))
        })?;
        let parse_num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("mapping `{spec}`: bad number `{s}`")))
        };
        match kind {
            "constant" => Ok(Self::Constant(parse_num(arg)?)),
            "proportional" => Ok(Self::Proportional(parse_num(arg)?)),
            "powerlaw" => {
                let (c, p) = arg.split_once(',').ok_or_else(|| {
                    CliError::Input(format!("mapping `{spec}`: powerlaw needs COEFF,EXPONENT"))
                })?;
                Ok(Self::PowerLaw(parse_num(c)?, parse_num(p)?))
            }
            "table" => Ok(Self::Table(formats::read_t2_table(Path::new(arg))?)),
            other => Err(CliError::Input(format!("unknown mapping kind `{other}`"))),
        }
    }

    /// Evaluates at a concentration in ppm; `None` outside a table's range.
    pub fn eval(&self, ppm: f64) -> Option<f64> {
        match self {
            Self::Constant(v) => Some(*v),
            Self::Proportional(c) => Some(c * ppm),
            Self::PowerLaw(c, p) => Some(c * ppm.powf(*p)),
            Self::Table(rows) => {
                let first = rows.first()?;
                let last = rows.last()?;
                if ppm < first.0 || ppm > last.0 {
                    return None;
                }
                let idx = rows
                    .partition_point(|r| r.0 <= ppm)
                    .clamp(1, rows.len() - 1);
                let (x0, y0) = rows[idx - 1];
                let (x1, y1) = rows[idx];
                if x1 == x0 {
                    return Some(y0);
                }
                Some(y0 + (y1 - y0) * (ppm - x0) / (x1 - x0))
            }
        }
    }
}

pub fn sensitivity_ratio(a: &str, b: &str, cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let parse_triple = |spec: &str| -> CliResult<SensitivityInput> {
        let parts: Vec<&str> = spec.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::Input(format!(
                "operating point `{spec}` must be epsilon,N,T2_us"
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Input(format!("bad number `{s}` in `{spec}`")))
            })
            .collect::<CliResult<_>>()?;
        SensitivityInput::new(nums[0], nums[1], nums[2]).map_err(classify)
    };
    let pa = parse_triple(a)?;
    let pb = parse_triple(b)?;
    let ratio = sensitivity::relative_sensitivity(&pa, &pb);
    let body = json!({
        "a": pa,
        "b": pb,
        "eta_a_over_eta_b": ratio,
        "eta_b_over_eta_a": 1.0 / ratio,
    });
    emit(&report("sensitivity-ratio", cfg, None, body), out)
}

pub fn sensitivity_table(
    densities_ppm: &str,
    n_spec: &str,
    t2_spec: &str,
    cfg: &RunConfig,
    out: Option<&Path>,
    csv_out: Option<&Path>,
) -> CliResult<()> {
    let ppm_list: Vec<f64> = densities_ppm
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad density `{s}`")))
        })
        .collect::<CliResult<_>>()?;
    let n_map = DensityMapping::parse(n_spec)?;
    let t2_map = DensityMapping::parse(t2_spec)?;
    let params = cfg.quench_params()?;

    let densities: Vec<NumberDensity> = ppm_list
        .iter()
        .map(|&ppm| {
            spatial::ppm_to_density_with(ppm, cfg.carbon_site_density_per_nm3).map_err(classify)
        })
        .collect::<CliResult<_>>()?;
    let site = cfg.carbon_site_density_per_nm3;
    let to_ppm = move |rho: f64| rho / (site * 1e-6);
    let rows = sensitivity::sensitivity_vs_density(
        &params,
        |rho| n_map.eval(to_ppm(rho)),
        |rho| t2_map.eval(to_ppm(rho)),
        &densities,
    )
    .map_err(classify)?;

    if let Some(path) = csv_out {
        let mut csv = String::from("density_ppm,epsilon_rel,n_emitters,t2_us,relative_eta\n");
        for (ppm, row) in ppm_list.iter().zip(&rows) {
            let _ = writeln!(
                csv,
                "{ppm},{},{},{},{}",
                row.epsilon_rel, row.n_emitters, row.t2_us, row.relative_eta
            );
        }
        write_text(&csv, Some(path))?;
    }

    let body = json!({
        "densities_ppm": ppm_list,
        "rows": rows,
        "n_mapping": n_spec,
        "t2_mapping": t2_spec,
    });
    emit(&report("sensitivity-table", cfg, None, body), out)
}
