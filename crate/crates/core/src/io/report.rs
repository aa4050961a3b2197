use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{json_error, Format, SCHEMA_VERSION};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Study,
    Comparison,
}

/// A document that can be persisted as JSON (lossless) or CSV (flattened).
///
/// Undefined values are modeled as `Option<f64>` and appear as `null` in JSON and as
/// an empty field in CSV.
pub trait Report: Serialize + DeserializeOwned {
    const KIND: ReportKind;

    fn csv_header() -> &'static [&'static str];

    fn csv_rows(&self) -> Vec<Vec<String>>;
}

#[derive(Serialize)]
struct EnvelopeRef<'a, T> {
    schema_version: u32,
    kind: ReportKind,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Deserialize)]
struct Envelope<T> {
    #[serde(flatten)]
    body: T,
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_report<R: Report>(report: &R, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let envelope = EnvelopeRef { schema_version: SCHEMA_VERSION, kind: R::KIND, body: report };
            let mut out = serde_json::to_vec_pretty(&envelope).map_err(|e| Error::Serialization(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            writer.write_record(R::csv_header()).map_err(|e| Error::Serialization(e.to_string()))?;
            for row in report.csv_rows() {
                writer.write_record(&row).map_err(|e| Error::Serialization(e.to_string()))?;
            }
            writer.into_inner().map_err(|e| Error::Serialization(e.to_string()))
        }
    }
}

/// Parses a JSON report, checking its schema version and kind.
pub fn read_report<R: Report>(bytes: &[u8]) -> Result<R> {
    let kind = report_kind(bytes)?;
    if kind != R::KIND {
        return Err(Error::schema(None, format!("expected a {:?} report, found {kind:?}", R::KIND)));
    }
    let envelope: Envelope<R> = serde_json::from_slice(bytes).map_err(json_error)?;
    Ok(envelope.body)
}

/// Reads the `kind` tag of a JSON report after checking its schema version.
pub fn report_kind(bytes: &[u8]) -> Result<ReportKind> {
    #[derive(Deserialize)]
    struct Tag {
        schema_version: u32,
        kind: ReportKind,
    }
    let tag: Tag = serde_json::from_slice(bytes).map_err(json_error)?;
    if tag.schema_version != SCHEMA_VERSION {
        return Err(Error::schema(None, format!("unsupported schema_version {}", tag.schema_version)));
    }
    Ok(tag.kind)
}
