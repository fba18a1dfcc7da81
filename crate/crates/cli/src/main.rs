//! Command-line front end: file ingestion, configuration, pipeline
//! orchestration and machine-readable outputs.

// `!(x > 0.0)` rejects NaN along with the out-of-domain values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod formats;
mod report;
mod sample;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::SpectrumKind;
use config::RunConfig;
use error::CliResult;

#[derive(Parser)]
#[command(
    name = "nvquench",
    version,
    about = "Nitrogen-quenching analysis of NV- fluorescence: decay fitting, \
             ensemble simulation, yield prediction, spectral calibration"
)]
struct Cli {
    /// JSON configuration file (falls back to $NVQUENCH_CONFIG, then defaults).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Random seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Excitation power (uW) whose measurement represents a power series.
    #[arg(long = "target-power", global = true, value_name = "UW")]
    target_power: Option<f64>,

    /// Long-pass filter edge (nm) for emission-fraction calculations.
    #[arg(long, global = true, value_name = "NM")]
    longpass: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit stretched exponentials to decay histograms and derive lifetime,
    /// tunnelling rate and relative quantum yield.
    FitDecay {
        /// Histogram CSV files (`time_ns,counts`; `# power_uw:` metadata
        /// marks a power series).
        #[arg(required = true)]
        histograms: Vec<PathBuf>,
    },
    /// Generate a synthetic ensemble decay histogram under the quench model.
    Simulate {
        /// Substitutional nitrogen concentration in ppm.
        #[arg(long, value_name = "PPM")]
        density_ppm: f64,
    },
    /// Fit the distance-dependent tunnelling rate to a sample table and
    /// emit the yield-vs-concentration curve.
    FitTunnelling {
        /// Sample table: CSV (`id,rho_n_ppm,rho_n_err,tau_ns,tau_err`) or a
        /// JSON record file from a previous run (re-validated on load).
        table: PathBuf,
        /// Where to write the dense epsilon(rho) curve CSV.
        #[arg(long, value_name = "PATH")]
        curve_out: Option<PathBuf>,
    },
    /// Predict the relative quantum yield at a nitrogen concentration.
    PredictQy {
        #[arg(long, value_name = "PPM")]
        density_ppm: f64,
    },
    /// Highest nitrogen concentration that still meets a yield target.
    MaxNitrogen {
        /// Target relative quantum yield in (0, 1).
        #[arg(long)]
        target: f64,
    },
    /// Defect concentration from an absorption spectrum.
    Concentration {
        spectrum: PathBuf,
        /// ftir: substitutional nitrogen from the 1130 cm^-1 band;
        /// vis: NV- from the 532 nm absorption (needs calibration config).
        #[arg(long, value_enum)]
        kind: SpectrumKind,
    },
    /// Separate NV0 and NV- emission components across a spectrum set.
    Unmix {
        /// Two or more emission spectrum CSV files on a wavelength axis.
        #[arg(required = true)]
        spectra: Vec<PathBuf>,
        /// Where to write the unit-area component curves.
        #[arg(long, value_name = "PATH")]
        components_out: Option<PathBuf>,
    },
    /// Brightness (emission slope vs excitation power) from a power table.
    Brightness { table: PathBuf },
    /// Ensemble-magnetometry sensitivity comparisons.
    Sensitivity {
        #[command(subcommand)]
        command: SensitivityCommand,
    },
}

#[derive(Subcommand)]
enum SensitivityCommand {
    /// Relative sensitivity eta_a / eta_b of two operating points.
    Ratio {
        /// First operating point as epsilon,N,T2_us.
        #[arg(long)]
        a: String,
        /// Second operating point as epsilon,N,T2_us.
        #[arg(long)]
        b: String,
    },
    /// Tabulate yield and relative sensitivity over a density sweep.
    Table {
        /// Comma-separated nitrogen concentrations in ppm.
        #[arg(long = "densities-ppm", value_name = "LIST")]
        densities_ppm: String,
        /// Emitter-count mapping: constant:X, proportional:C, powerlaw:C,P
        /// or table:FILE.
        #[arg(long = "n-mapping", value_name = "SPEC")]
        n_mapping: String,
        /// Coherence-time mapping, same forms as --n-mapping.
        #[arg(long = "t2-mapping", value_name = "SPEC")]
        t2_mapping: String,
        /// Optional CSV copy of the table.
        #[arg(long, value_name = "PATH")]
        csv_out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(p) = cli.target_power {
        cfg.target_power_uw = p;
    }
    if let Some(lp) = cli.longpass {
        cfg.longpass_nm = lp;
    }
    cfg.validate()?;
    let out = cli.out.as_deref();

    match &cli.command {
        Command::FitDecay { histograms } => commands::fit_decay(histograms, &cfg, out),
        Command::Simulate { density_ppm } => commands::simulate_cmd(*density_ppm, &cfg, out),
        Command::FitTunnelling { table, curve_out } => {
            commands::fit_tunnelling(table, &cfg, out, curve_out.as_deref())
        }
        Command::PredictQy { density_ppm } => commands::predict_qy(*density_ppm, &cfg, out),
        Command::MaxNitrogen { target } => commands::max_nitrogen(*target, &cfg, out),
        Command::Concentration { spectrum, kind } => {
            commands::concentration(spectrum, *kind, &cfg, out)
        }
        Command::Unmix {
            spectra,
            components_out,
        } => commands::unmix(spectra, &cfg, out, components_out.as_deref()),
        Command::Brightness { table } => commands::brightness(table, &cfg, out),
        Command::Sensitivity { command } => match command {
            SensitivityCommand::Ratio { a, b } => commands::sensitivity_ratio(a, b, &cfg, out),
            SensitivityCommand::Table {
                densities_ppm,
                n_mapping,
                t2_mapping,
                csv_out,
            } => commands::sensitivity_table(
                densities_ppm,
                n_mapping,
                t2_mapping,
                &cfg,
                out,
                csv_out.as_deref(),
            ),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
