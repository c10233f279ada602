//! Dataset and report persistence.
//!
//! Datasets are UTF-8 CSV with the fixed header
//! `t_min,T_c,T_e_in,T_e_out,T_a,m`, one row per minute. The accumulated
//! compressor signal is never stored; it is recomputed on ingest. Floats are
//! written with Rust's shortest round-trip formatting, so write -> read is
//! numerically lossless.
//!
//! Fit reports and parameter sets are versioned JSON documents; the version
//! is checked on read.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::estimate::FitReport;
use crate::model::{Dataset, InputSeries, ThermalParams};
use crate::{Error, Result};

/// Expected dataset header.
pub const DATASET_HEADER: &str = "t_min,T_c,T_e_in,T_e_out,T_a,m";

/// Plausibility window for every temperature column, degC.
pub const TEMP_RANGE: (f64, f64) = (-150.0, 60.0);

const FIT_REPORT_FORMAT: &str = "icebox-fit-report";
const FIT_REPORT_VERSION: u32 = 1;
const PARAMS_FORMAT: &str = "icebox-params";
const PARAMS_VERSION: u32 = 1;

/// Serializes a dataset to the CSV text format.
pub fn dataset_to_string(data: &Dataset) -> Result<String> {
    let dt = data.inputs.dt();
    if data.inputs.len() > 1 && dt != 1.0 {
        return Err(Error::Data {
            line: 2,
            reason: format!("dataset files require a 1-minute stride, got {dt}"),
        });
    }
    let mut out = String::with_capacity(data.len() * 48 + 32);
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for (k, r) in data.inputs.records().iter().enumerate() {
        check_temp_range(r.t_a, k + 2, "T_a")?;
        check_temp_range(r.t_e_in, k + 2, "T_e_in")?;
        check_temp_range(r.t_e_out, k + 2, "T_e_out")?;
        check_temp_range(data.observations[k], k + 2, "T_c")?;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t_min, data.observations[k], r.t_e_in, r.t_e_out, r.t_a, r.m
        )
        .expect("string write");
    }
    Ok(out)
}

fn check_temp_range(value: f64, line: usize, column: &str) -> Result<()> {
    if !(TEMP_RANGE.0..=TEMP_RANGE.1).contains(&value) {
        return Err(Error::Data {
            line,
            reason: format!(
                "{column} = {value} outside the plausible range [{}, {}] degC",
                TEMP_RANGE.0, TEMP_RANGE.1
            ),
        });
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, column: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Data {
        line,
        reason: format!("cannot parse {column} from '{field}'"),
    })
}

/// Parses and validates the CSV text format, recomputing the accumulated
/// compressor signal.
pub fn dataset_from_str(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Data {
        line: 1,
        reason: "empty file".into(),
    })?;
    if header.trim() != DATASET_HEADER {
        return Err(Error::Data {
            line: 1,
            reason: format!("expected header '{DATASET_HEADER}', got '{header}'"),
        });
    }
    let mut t_min = Vec::new();
    let mut observations = Vec::new();
    let mut t_e_in = Vec::new();
    let mut t_e_out = Vec::new();
    let mut t_a = Vec::new();
    let mut m = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1;
        if row.trim().is_empty() {
            return Err(Error::Data {
                line,
                reason: "blank row".into(),
            });
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Data {
                line,
                reason: format!("expected 6 comma-separated fields, got {}", fields.len()),
            });
        }
        let t: f64 = parse_field(fields[0], line, "t_min")?;
        let tc: f64 = parse_field(fields[1], line, "T_c")?;
        let tei: f64 = parse_field(fields[2], line, "T_e_in")?;
        let teo: f64 = parse_field(fields[3], line, "T_e_out")?;
        let ta: f64 = parse_field(fields[4], line, "T_a")?;
        let m_raw: i64 = parse_field(fields[5], line, "m")?;
        if m_raw != 0 && m_raw != 1 {
            return Err(Error::Data {
                line,
                reason: format!("m must be 0 or 1, got {m_raw}"),
            });
        }
        check_temp_range(tc, line, "T_c")?;
        check_temp_range(tei, line, "T_e_in")?;
        check_temp_range(teo, line, "T_e_out")?;
        check_temp_range(ta, line, "T_a")?;
        if let Some(prev) = t_min.last() {
            let step = t - prev;
            if step != 1.0 {
                return Err(Error::Data {
                    line,
                    reason: format!("stride must be exactly 1 minute, got {step}"),
                });
            }
        }
        t_min.push(t);
        observations.push(tc);
        t_e_in.push(tei);
        t_e_out.push(teo);
        t_a.push(ta);
        m.push(m_raw as u8);
    }
    if observations.is_empty() {
        return Err(Error::Data {
            line: 2,
            reason: "no data rows".into(),
        });
    }
    let inputs = InputSeries::assemble(t_min[0], 1.0, &t_a, &t_e_in, &t_e_out, &m)
        .map_err(|e| match e {
            Error::InvalidInput { index, reason } => Error::Data {
                line: index + 2,
                reason,
            },
            other => other,
        })?;
    Dataset::new(inputs, observations).map_err(|e| match e {
        Error::InvalidInput { index, reason } => Error::Data {
            line: index + 2,
            reason,
        },
        other => other,
    })
}

/// Writes a dataset CSV atomically (temp file + rename).
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let text = dataset_to_string(data)?;
    write_atomic(path, text.as_bytes())
}

/// Reads and validates a dataset CSV.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    dataset_from_str(&text)
}

#[derive(Serialize, Deserialize)]
struct VersionedDocument<T> {
    format: String,
    version: u32,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize, Deserialize)]
struct FitReportBody {
    report: FitReport,
}

#[derive(Serialize, Deserialize)]
struct ParamsBody {
    params: ThermalParams,
}

fn check_format(format: &str, version: u32, expect_format: &str, expect_version: u32) -> Result<()> {
    if format != expect_format {
        return Err(Error::Report(format!(
            "expected format '{expect_format}', got '{format}'"
        )));
    }
    if version != expect_version {
        return Err(Error::Report(format!(
            "unsupported {expect_format} version {version}; this build reads version {expect_version}"
        )));
    }
    Ok(())
}

/// Serializes a fit report to versioned JSON.
pub fn fit_report_to_string(report: &FitReport) -> Result<String> {
    let doc = VersionedDocument {
        format: FIT_REPORT_FORMAT.to_string(),
        version: FIT_REPORT_VERSION,
        body: FitReportBody {
            report: report.clone(),
        },
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Report(e.to_string()))
}

/// Parses a versioned fit report, checking format and version.
pub fn fit_report_from_str(text: &str) -> Result<FitReport> {
    let doc: VersionedDocument<FitReportBody> =
        serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
    check_format(&doc.format, doc.version, FIT_REPORT_FORMAT, FIT_REPORT_VERSION)?;
    Ok(doc.body.report)
}

pub fn write_fit_report(path: &Path, report: &FitReport) -> Result<()> {
    write_atomic(path, fit_report_to_string(report)?.as_bytes())
}

pub fn read_fit_report(path: &Path) -> Result<FitReport> {
    fit_report_from_str(&std::fs::read_to_string(path)?)
}

/// Serializes a parameter set (e.g. simulation truth values).
pub fn params_to_string(params: &ThermalParams) -> Result<String> {
    let doc = VersionedDocument {
        format: PARAMS_FORMAT.to_string(),
        version: PARAMS_VERSION,
        body: ParamsBody { params: *params },
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Report(e.to_string()))
}

pub fn params_from_str(text: &str) -> Result<ThermalParams> {
    let doc: VersionedDocument<ParamsBody> =
        serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
    check_format(&doc.format, doc.version, PARAMS_FORMAT, PARAMS_VERSION)?;
    Ok(doc.body.params)
}

pub fn write_params(path: &Path, params: &ThermalParams) -> Result<()> {
    write_atomic(path, params_to_string(params)?.as_bytes())
}

pub fn read_params(path: &Path) -> Result<ThermalParams> {
    params_from_str(&std::fs::read_to_string(path)?)
}

/// Writes bytes to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp_path = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp_path, bytes)?;
    std::fs::rename(&tmp_path, path)?;
    Ok(())
}
