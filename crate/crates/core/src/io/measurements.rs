use std::collections::HashSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{json_error, Format, SCHEMA_VERSION};
use crate::{Error, Result};

/// Exact CSV header for measurement files.
pub const CSV_HEADER: [&str; 4] = ["application", "cpu_freq_mhz", "cores", "time_s"];

/// One pre-aggregated execution time (typically the median of several runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub application: String,
    pub cpu_freq_mhz: u32,
    pub cores: u32,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementTable {
    /// Fixed memory-system frequency the measurements were taken at.
    pub memory_frequency_mhz: u32,
    /// Number of runs each time was aggregated from. Informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs_aggregated: Option<u32>,
    pub rows: Vec<Measurement>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TableDocument {
    schema_version: u32,
    memory_frequency_mhz: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    runs_aggregated: Option<u32>,
    rows: Vec<Measurement>,
}

impl MeasurementTable {
    /// Checks positivity of every field and uniqueness of `(application, frequency, cores)`.
    pub fn validate(&self) -> Result<()> {
        if self.memory_frequency_mhz == 0 {
            return Err(Error::schema(None, "memory frequency must be positive"));
        }
        let mut seen = HashSet::with_capacity(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            if !(r.time_s > 0.0 && r.time_s.is_finite()) {
                return Err(Error::schema(Some(i), format!("time_s = {} must be positive and finite", r.time_s)));
            }
            if r.cores == 0 {
                return Err(Error::schema(Some(i), "cores must be at least 1"));
            }
            if r.cpu_freq_mhz == 0 {
                return Err(Error::schema(Some(i), "cpu_freq_mhz must be positive"));
            }
            if !seen.insert((r.application.as_str(), r.cpu_freq_mhz, r.cores)) {
                return Err(Error::schema(
                    Some(i),
                    format!("duplicate measurement for ({}, {} MHz, {} cores)", r.application, r.cpu_freq_mhz, r.cores),
                ));
            }
        }
        Ok(())
    }

    /// Application names in order of first appearance.
    pub fn applications(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.rows.iter().map(|r| r.application.as_str()).filter(|a| seen.insert(*a)).collect()
    }

    /// Sub-table holding only the rows of one application.
    pub fn for_application(&self, application: &str) -> MeasurementTable {
        MeasurementTable {
            memory_frequency_mhz: self.memory_frequency_mhz,
            runs_aggregated: self.runs_aggregated,
            rows: self.rows.iter().filter(|r| r.application == application).cloned().collect(),
        }
    }
}

/// Parses and validates a measurement table.
///
/// CSV input requires `memory_frequency_mhz`. For JSON the value embedded in the
/// document is used unless an override is given.
pub fn load_measurements<R: Read>(
    source: R,
    format: Format,
    memory_frequency_mhz: Option<u32>,
) -> Result<MeasurementTable> {
    let table = match format {
        Format::Csv => {
            let mem = memory_frequency_mhz
                .ok_or_else(|| Error::schema(None, "CSV input needs the memory frequency to be supplied"))?;
            parse_csv(source, mem)?
        }
        Format::Json => {
            let doc: TableDocument = serde_json::from_reader(source).map_err(json_error)?;
            if doc.schema_version != SCHEMA_VERSION {
                return Err(Error::schema(None, format!("unsupported schema_version {}", doc.schema_version)));
            }
            MeasurementTable {
                memory_frequency_mhz: memory_frequency_mhz.unwrap_or(doc.memory_frequency_mhz),
                runs_aggregated: doc.runs_aggregated,
                rows: doc.rows,
            }
        }
    };
    table.validate()?;
    Ok(table)
}

fn parse_csv<R: Read>(source: R, memory_frequency_mhz: u32) -> Result<MeasurementTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != CSV_HEADER {
        return Err(Error::schema(
            None,
            format!("expected header '{}', found '{}'", CSV_HEADER.join(","), got.join(",")),
        ));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let number = |i: usize| -> Result<u32> {
            field(i).parse().map_err(|e: std::num::ParseIntError| Error::Parse {
                line,
                field: CSV_HEADER[i].to_string(),
                message: e.to_string(),
            })
        };
        let time_s = field(3).parse::<f64>().map_err(|e| Error::Parse {
            line,
            field: CSV_HEADER[3].to_string(),
            message: e.to_string(),
        })?;
        rows.push(Measurement {
            application: field(0).to_string(),
            cpu_freq_mhz: number(1)?,
            cores: number(2)?,
            time_s,
        });
    }
    Ok(MeasurementTable { memory_frequency_mhz, runs_aggregated: None, rows })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { line, field: String::new(), message: e.to_string() }
}

/// Serializes a table. CSV output omits the memory frequency.
pub fn write_measurements(table: &MeasurementTable, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            writer.write_record(CSV_HEADER).map_err(|e| Error::Serialization(e.to_string()))?;
            for r in &table.rows {
                writer
                    .write_record([
                        r.application.clone(),
                        r.cpu_freq_mhz.to_string(),
                        r.cores.to_string(),
                        r.time_s.to_string(),
                    ])
                    .map_err(|e| Error::Serialization(e.to_string()))?;
            }
            writer.into_inner().map_err(|e| Error::Serialization(e.to_string()))
        }
        Format::Json => {
            let doc = TableDocument {
                schema_version: SCHEMA_VERSION,
                memory_frequency_mhz: table.memory_frequency_mhz,
                runs_aggregated: table.runs_aggregated,
                rows: table.rows.clone(),
            };
            let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| Error::Serialization(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load_csv(s: &str) -> Result<MeasurementTable> {
        load_measurements(s.as_bytes(), Format::Csv, Some(1000))
    }

    #[test]
    fn two_row_csv() {
        let t = load_csv("application,cpu_freq_mhz,cores,time_s\nx,2500,1,100\nx,2500,4,30.5\n").unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[1].cores, 4);
        assert_eq!(t.rows[1].time_s, 30.5);
        assert_eq!(t.memory_frequency_mhz, 1000);
    }

    #[test]
    fn negative_time_names_the_row() {
        let err = load_csv("application,cpu_freq_mhz,cores,time_s\nx,2500,1,100\nx,2500,2,-1\n").unwrap_err();
        assert!(matches!(err, Error::Schema { row: Some(1), .. }), "{err:?}");
    }

    #[test]
    fn duplicate_triple_rejected() {
        let err = load_csv("application,cpu_freq_mhz,cores,time_s\nx,2500,1,100\nx,2500,1,99\n").unwrap_err();
        assert!(matches!(err, Error::Schema { row: Some(1), .. }), "{err:?}");
    }

    #[test]
    fn header_and_field_errors() {
        let err = load_csv("app,freq,cores,time\nx,1,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Schema { row: None, .. }));
        let err = load_csv("application,cpu_freq_mhz,cores,time_s\nx,fast,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, ref field, .. } if field == "cpu_freq_mhz"), "{err:?}");
        let err = load_csv("application,cpu_freq_mhz,cores,time_s\nx,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err:?}");
        let err = load_measurements(&b"application,cpu_freq_mhz,cores,time_s\n"[..], Format::Csv, None);
        assert!(matches!(err, Err(Error::Schema { .. })));
    }

    #[test]
    fn json_schema_version_checked() {
        let doc = r#"{"schema_version": 2, "memory_frequency_mhz": 1000, "rows": []}"#;
        assert!(matches!(load_measurements(doc.as_bytes(), Format::Json, None), Err(Error::Schema { .. })));
        let doc = r#"{"schema_version": 1, "memory_frequency_mhz": 1000, "rows": [], "extra": 1}"#;
        assert!(matches!(load_measurements(doc.as_bytes(), Format::Json, None), Err(Error::Parse { .. })));
        let doc = r#"{"schema_version": 1, "memory_frequency_mhz": 800, "rows": []}"#;
        assert_eq!(load_measurements(doc.as_bytes(), Format::Json, Some(900)).unwrap().memory_frequency_mhz, 900);
    }

    #[test]
    fn csv_quotes_awkward_names() {
        let t = MeasurementTable {
            memory_frequency_mhz: 1000,
            runs_aggregated: None,
            rows: vec![Measurement { application: "a,\"b\"".into(), cpu_freq_mhz: 1200, cores: 1, time_s: 0.1 }],
        };
        let bytes = write_measurements(&t, Format::Csv).unwrap();
        assert!(!bytes.contains(&b'\r'));
        assert_eq!(load_measurements(&bytes[..], Format::Csv, Some(1000)).unwrap(), t);
    }

    fn table() -> impl Strategy<Value = MeasurementTable> {
        let row = ("[a-z]{1,6}", 1u32..5000, 1u32..128, 1e-6f64..1e6);
        (1u32..5000, prop::option::of(1u32..20), prop::collection::vec(row, 0..30)).prop_map(|(mem, runs, rows)| {
            let mut seen = HashSet::new();
            let rows = rows
                .into_iter()
                .filter(|(a, f, c, _)| seen.insert((a.clone(), *f, *c)))
                .map(|(application, cpu_freq_mhz, cores, time_s)| Measurement {
                    application,
                    cpu_freq_mhz,
                    cores,
                    time_s,
                })
                .collect();
            MeasurementTable { memory_frequency_mhz: mem, runs_aggregated: runs, rows }
        })
    }

    proptest! {
        #[test]
        fn json_round_trip(t in table()) {
            let bytes = write_measurements(&t, Format::Json).unwrap();
            prop_assert_eq!(load_measurements(&bytes[..], Format::Json, None).unwrap(), t);
        }

        #[test]
        fn csv_round_trip_rows(t in table()) {
            let bytes = write_measurements(&t, Format::Csv).unwrap();
            let back = load_measurements(&bytes[..], Format::Csv, Some(t.memory_frequency_mhz)).unwrap();
            prop_assert_eq!(back.rows, t.rows);
        }

        #[test]
        fn parsers_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
            let _ = load_measurements(&bytes[..], Format::Csv, Some(1000));
            let _ = load_measurements(&bytes[..], Format::Json, None);
        }
    }
}
