//! Measurement ingestion, synthetic data generation and report persistence.
//!
//! Two interchange formats are supported. CSV files carry the exact header
//! `application,cpu_freq_mhz,cores,time_s`, with the memory frequency supplied
//! out of band. JSON documents carry `"schema_version": 1` and embed the memory
//! frequency. All output is UTF-8 with `\n` line endings.

mod measurements;
pub(crate) mod report;
mod synthetic;

use std::fmt;
use std::str::FromStr;

pub use measurements::{load_measurements, write_measurements, Measurement, MeasurementTable, CSV_HEADER};
pub use report::{read_report, report_kind, write_report, Report, ReportKind};
pub use synthetic::{generate_synthetic, SyntheticSpec};

/// Version stamped into every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(crate::Error::InvalidConfig(format!("unknown format '{other}'"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

pub(crate) fn json_error(e: serde_json::Error) -> crate::Error {
    crate::Error::Parse { line: e.line(), field: String::new(), message: e.to_string() }
}
