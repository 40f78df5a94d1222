//! Summary rows and rendering of trace reports.
//!
//! `table` and `csv` carry the six summary columns only. `json` is the
//! lossless form: fix, lineage sets, per-project statuses with evidence, and
//! the summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{Status, TraceReport};

pub const SCHEMA_VERSION: &str = "1";

pub const COLUMNS: [&str; 6] = [
    "Project with CVE",
    "CVE",
    "Vulnerable Blobs",
    "Vulnerable Projects",
    "Safe Projects",
    "Unknown Projects",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown format {0:?} (expected one of: table, csv, json)")]
    UnknownFormat(String),
    #[error("unsupported report schema version {0:?}")]
    SchemaVersion(String),
    #[error("json output holds exactly one report, got {0}")]
    JsonArity(usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub project_with_cve: String,
    pub cve: String,
    pub vulnerable_blobs: usize,
    pub vulnerable_projects: usize,
    pub safe_projects: usize,
    pub unknown_projects: usize,
}

impl SummaryRow {
    fn cells(&self) -> [String; 6] {
        [
            self.project_with_cve.clone(),
            self.cve.clone(),
            self.vulnerable_blobs.to_string(),
            self.vulnerable_projects.to_string(),
            self.safe_projects.to_string(),
            self.unknown_projects.to_string(),
        ]
    }
}

pub fn summarize(report: &TraceReport, upstream_name: &str) -> SummaryRow {
    let count = |status| {
        report
            .statuses
            .iter()
            .filter(|s| s.status == status)
            .count()
    };
    SummaryRow {
        project_with_cve: upstream_name.to_owned(),
        cve: report
            .fix
            .cve_id
            .clone()
            .unwrap_or_else(|| "UNKNOWN".to_owned()),
        vulnerable_blobs: report.lineage.vulnerable.len(),
        vulnerable_projects: count(Status::Vulnerable),
        safe_projects: count(Status::Safe),
        unknown_projects: count(Status::Unknown),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(ReportError::UnknownFormat(other.to_owned())),
        }
    }
}

#[derive(Serialize)]
struct DocumentRef<'a> {
    schema_version: &'a str,
    #[serde(flatten)]
    report: &'a TraceReport,
}

#[derive(Deserialize)]
struct Document {
    schema_version: String,
    #[serde(flatten)]
    report: TraceReport,
}

pub fn render(report: &TraceReport, format: Format) -> Result<Vec<u8>, ReportError> {
    render_many(std::slice::from_ref(report), format)
}

/// Render several reports; table and csv get one row per report.
pub fn render_many(reports: &[TraceReport], format: Format) -> Result<Vec<u8>, ReportError> {
    let rows: Vec<&SummaryRow> = reports.iter().map(|r| &r.summary).collect();
    match format {
        Format::Table => Ok(render_table(&rows).into_bytes()),
        Format::Csv => render_csv(&rows),
        Format::Json => match reports {
            [report] => {
                let mut out = serde_json::to_vec_pretty(&DocumentRef {
                    schema_version: SCHEMA_VERSION,
                    report,
                })?;
                out.push(b'\n');
                Ok(out)
            }
            _ => Err(ReportError::JsonArity(reports.len())),
        },
    }
}

pub fn parse_json(bytes: &[u8]) -> Result<TraceReport, ReportError> {
    let doc: Document = serde_json::from_slice(bytes)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(ReportError::SchemaVersion(doc.schema_version));
    }
    Ok(doc.report)
}

fn render_csv(rows: &[&SummaryRow]) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for row in rows {
        w.write_record(row.cells())?;
    }
    w.into_inner().map_err(|e| ReportError::Io(e.into_error()))
}

fn render_table(rows: &[&SummaryRow]) -> String {
    let cells: Vec<[String; 6]> = rows.iter().map(|r| r.cells()).collect();
    let widths: Vec<usize> = (0..6)
        .map(|i| {
            cells
                .iter()
                .map(|c| c[i].chars().count())
                .chain([COLUMNS[i].len()])
                .max()
                .unwrap()
        })
        .collect();
    let line = |values: [&str; 6]| {
        let mut s = String::new();
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            // text columns left, counts right
            if i < 2 {
                let _ = write!(s, "{v:<w$}", w = widths[i]);
            } else {
                let _ = write!(s, "{v:>w$}", w = widths[i]);
            }
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(COLUMNS);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&line(std::array::from_fn(|i| rule[i].as_str())));
    for c in &cells {
        out.push_str(&line(std::array::from_fn(|i| c[i].as_str())));
    }
    out
}

/// Project names per status, in report order.
pub fn project_list(report: &TraceReport, status: Status) -> Vec<&str> {
    report
        .statuses
        .iter()
        .filter(|s| s.status == status)
        .map(|s| s.project.as_str())
        .collect()
}

/// Write `vulnerable.txt`, `safe.txt` and `unknown.txt` (plus
/// `fixed_only.txt` when present) into `dir`, one project per line.
pub fn write_project_lists(report: &TraceReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir)?;
    let mut lists: Vec<(&str, Vec<&str>)> = Status::ALL
        .iter()
        .map(|&s| {
            let file = match s {
                Status::Vulnerable => "vulnerable.txt",
                Status::Safe => "safe.txt",
                Status::Unknown => "unknown.txt",
            };
            (file, project_list(report, s))
        })
        .collect();
    if let Some(adopters) = &report.fixed_only_adopters {
        lists.push((
            "fixed_only.txt",
            adopters.iter().map(String::as_str).collect(),
        ));
    }
    let mut written = Vec::new();
    for (file, names) in lists {
        let path = dir.join(file);
        let mut body = String::new();
        for name in names {
            body.push_str(name);
            body.push('\n');
        }
        let tmp = dir.join(format!(".{file}.tmp"));
        fs::write(&tmp, body)?;
        fs::rename(&tmp, &path)?;
        written.push(path);
    }
    Ok(written)
}
