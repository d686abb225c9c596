//! CSV and JSON serialization of [`TestReport`] lists.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::TestReport;

pub const CSV_HEADER: [&str; 7] = ["experiment", "statistic_name", "value", "threshold", "n", "seed", "pass"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::invalid(format!("unknown report format `{other}` (expected csv or json)"))),
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    experiment: &'a str,
    statistic_name: &'a str,
    value: f64,
    threshold: f64,
    n: u64,
    seed: u64,
    pass: bool,
}

pub fn to_csv(reports: &[TestReport]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let internal = |e: csv::Error| Error::Internal(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(internal)?;
    for r in reports {
        w.serialize(CsvRow {
            experiment: &r.experiment,
            statistic_name: &r.name,
            value: r.statistic,
            threshold: r.threshold,
            n: r.n,
            seed: r.seed,
            pass: r.pass,
        })
        .map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

pub fn to_json(reports: &[TestReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

pub fn render(reports: &[TestReport], format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(reports),
        Format::Json => to_json(reports),
    }
}

pub fn write_report(reports: &[TestReport], format: Format, path: &Path) -> Result<()> {
    let text = render(reports, format)?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json(path: &Path) -> Result<Vec<TestReport>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}
