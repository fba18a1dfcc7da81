//! CSV file formats.
//!
//! All files are UTF-8 with `.` decimals; lines starting with `#` are
//! comments. Metadata rides in `# key: value` comment lines.
//!
//! - histogram: header `time_ns,counts`, times are bin centres;
//!   metadata keys `power_uw`, `rep_period_ns`
//! - spectrum: header `axis,value`; metadata key `axis_kind`
//!   (`wavelength_nm` or `wavenumber_per_cm`)
//! - sample table: header `id,rho_n_ppm,rho_n_err,tau_ns,tau_err`
//! - power table: header `power_uw,intensity`
//! - T2 table: header `density_ppm,t2_us`

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nvquench_core::lifetime::{Acquisition, DecayHistogram};
use nvquench_core::quench::TunnellingSample;
use nvquench_core::spectra::{AxisKind, SpectrumSeries};

use crate::error::{CliError, CliResult};

#[derive(Debug)]
pub struct HistogramFile {
    pub histogram: DecayHistogram,
    pub power_uw: Option<f64>,
}

fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

/// Collects `# key: value` metadata lines.
fn metadata(text: &str) -> HashMap<String, String> {
    let mut out = HashMap::new();
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else {
            continue;
        };
        if let Some((key, value)) = rest.split_once(':') {
            out.insert(key.trim().to_string(), value.trim().to_string());
        }
    }
    out
}

struct CsvTable {
    rows: Vec<(u64, Vec<String>)>, // (line number, fields)
}

fn parse_csv(path: &Path, text: &str, expected_header: &[&str]) -> CliResult<CsvTable> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != expected_header {
        return Err(CliError::Input(format!(
            "{}: expected header `{}`, found `{}`",
            path.display(),
            expected_header.join(","),
            header.join(",")
        )));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line().to_string())
                .unwrap_or_else(|| "?".into());
            CliError::Input(format!("{} line {line}: {e}", path.display()))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, record.iter().map(|s| s.to_string()).collect()));
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    Ok(CsvTable { rows })
}

fn field_f64(path: &Path, line: u64, name: &str, raw: &str) -> CliResult<f64> {
    raw.parse::<f64>().map_err(|_| {
        CliError::Input(format!(
            "{} line {line}: cannot parse {name} from `{raw}`",
            path.display()
        ))
    })
}

pub fn read_histogram(path: &Path) -> CliResult<HistogramFile> {
    let text = read_to_string(path)?;
    let meta = metadata(&text);
    let table = parse_csv(path, &text, &["time_ns", "counts"])?;

    let mut centers = Vec::with_capacity(table.rows.len());
    let mut counts = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        centers.push(field_f64(path, *line, "time_ns", &fields[0])?);
        let c = fields[1].parse::<u64>().map_err(|_| {
            CliError::Input(format!(
                "{} line {line}: cannot parse counts from `{}`",
                path.display(),
                fields[1]
            ))
        })?;
        counts.push(c);
    }

    let power_uw = match meta.get("power_uw") {
        Some(raw) => Some(field_f64(path, 0, "power_uw", raw)?),
        None => None,
    };
    let acquisition = meta
        .get("rep_period_ns")
        .map(|raw| field_f64(path, 0, "rep_period_ns", raw))
        .transpose()?
        .map(|rep| Acquisition {
            rep_period_ns: rep,
            total_pulses: None,
        });

    let histogram =
        DecayHistogram::from_centers(&centers, counts, acquisition).map_err(CliError::input)?;
    Ok(HistogramFile {
        histogram,
        power_uw,
    })
}

pub fn write_histogram(h: &DecayHistogram, power_uw: Option<f64>) -> String {
    let mut out = String::new();
    if let Some(acq) = &h.acquisition {
        let _ = writeln!(out, "# rep_period_ns: {}", acq.rep_period_ns);
    }
    if let Some(p) = power_uw {
        let _ = writeln!(out, "# power_uw: {p}");
    }
    out.push_str("time_ns,counts\n");
    for (i, &c) in h.counts().iter().enumerate() {
        let _ = writeln!(out, "{},{}", h.bin_center(i), c);
    }
    out
}

pub fn read_spectrum(path: &Path) -> CliResult<SpectrumSeries> {
    let text = read_to_string(path)?;
    let meta = metadata(&text);
    let kind = match meta.get("axis_kind").map(String::as_str) {
        Some("wavelength_nm") => AxisKind::WavelengthNm,
        Some("wavenumber_per_cm") => AxisKind::WavenumberPerCm,
        Some(other) => {
            return Err(CliError::Input(format!(
                "{}: unknown axis_kind `{other}`",
                path.display()
            )))
        }
        None => {
            return Err(CliError::Input(format!(
                "{}: missing `# axis_kind:` metadata line",
                path.display()
            )))
        }
    };
    let table = parse_csv(path, &text, &["axis", "value"])?;
    let mut axis = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        axis.push(field_f64(path, *line, "axis", &fields[0])?);
        values.push(field_f64(path, *line, "value", &fields[1])?);
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    SpectrumSeries::new(kind, axis, values, label).map_err(CliError::input)
}

pub fn read_sample_table(path: &Path) -> CliResult<Vec<TunnellingSample>> {
    let text = read_to_string(path)?;
    let table = parse_csv(
        path,
        &text,
        &["id", "rho_n_ppm", "rho_n_err", "tau_ns", "tau_err"],
    )?;
    let mut samples = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        samples.push(TunnellingSample {
            id: fields[0].clone(),
            rho_n_ppm: field_f64(path, *line, "rho_n_ppm", &fields[1])?,
            rho_n_err_ppm: field_f64(path, *line, "rho_n_err", &fields[2])?,
            tau_ns: field_f64(path, *line, "tau_ns", &fields[3])?,
            tau_err_ns: field_f64(path, *line, "tau_err", &fields[4])?,
        });
    }
    Ok(samples)
}

pub fn read_power_table(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let text = read_to_string(path)?;
    let table = parse_csv(path, &text, &["power_uw", "intensity"])?;
    let mut powers = Vec::new();
    let mut intensities = Vec::new();
    for (line, fields) in &table.rows {
        powers.push(field_f64(path, *line, "power_uw", &fields[0])?);
        intensities.push(field_f64(path, *line, "intensity", &fields[1])?);
    }
    Ok((powers, intensities))
}

pub fn read_t2_table(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let text = read_to_string(path)?;
    let table = parse_csv(path, &text, &["density_ppm", "t2_us"])?;
    let mut rows = Vec::new();
    for (line, fields) in &table.rows {
        rows.push((
            field_f64(path, *line, "density_ppm", &fields[0])?,
            field_f64(path, *line, "t2_us", &fields[1])?,
        ));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn temp_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn histogram_round_trip() {
        let centers: Vec<f64> = (0..20).map(|i| 0.05 + 0.1 * i as f64).collect();
        let counts: Vec<u64> = (0..20).map(|i| 1000 - i * 7).collect();
        let h = DecayHistogram::from_centers(
            &centers,
            counts,
            Some(Acquisition {
                rep_period_ns: 100.0,
                total_pulses: None,
            }),
        )
        .unwrap();
        let text = write_histogram(&h, Some(50.0));
        let f = temp_file(&text);
        let back = read_histogram(f.path()).unwrap();
        assert_eq!(back.histogram.counts(), h.counts());
        assert_eq!(back.power_uw, Some(50.0));
        assert_eq!(back.histogram.acquisition.unwrap().rep_period_ns, 100.0);
    }

    #[test]
    fn empty_file_is_an_input_error() {
        let f = temp_file("");
        let err = read_histogram(f.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let f = temp_file("time_ns,counts\n0.05,10\n0.15,oops\n");
        let err = read_histogram(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "message was: {msg}");
    }

    #[test]
    fn spectrum_needs_axis_kind() {
        let f = temp_file("axis,value\n500,1\n501,2\n");
        assert!(read_spectrum(f.path()).is_err());
        let g = temp_file("# axis_kind: wavelength_nm\naxis,value\n500,1\n501,2\n");
        let s = read_spectrum(g.path()).unwrap();
        assert_eq!(s.axis_kind, AxisKind::WavelengthNm);
    }

    #[test]
    fn wavenumber_spectrum_parses() {
        let f = temp_file(
            "# axis_kind: wavenumber_per_cm\naxis,value\n1000,0.5\n1010,0.75\n1020,0.25\n",
        );
        let s = read_spectrum(f.path()).unwrap();
        assert_eq!(s.axis_kind, AxisKind::WavenumberPerCm);
        assert_eq!(s.values(), &[0.5, 0.75, 0.25]);
    }

    #[test]
    fn sample_table_parses() {
        let f = temp_file(
            "id,rho_n_ppm,rho_n_err,tau_ns,tau_err\n\
             low,1.81,0.01,13.90,0.08\n\
             high,380,10,4.4,0.1\n",
        );
        let samples = read_sample_table(f.path()).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[1].id, "high");
        assert_eq!(samples[1].rho_n_ppm, 380.0);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let f = temp_file("t,n\n1,2\n");
        let err = read_histogram(f.path()).unwrap_err();
        assert!(err.to_string().contains("expected header"));
    }
}
