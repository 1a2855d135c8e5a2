//! Benchmark report files.
//!
//! Both formats list rows in the order given, with columns
//! `method, t, k, alpha, m, s, trials, converged, avg_calls, avg_time,
//! avg_calls_converged`. Calls are printed with one decimal and times with
//! two; hyperparameters that do not apply to a method are left empty.
//! The JSON form also carries the per-trial records.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::{BenchStats, TrialRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// `.json` selects JSON, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::Json,
            _ => Self::Csv,
        }
    }
}

pub const COLUMNS: [&str; 11] = [
    "method",
    "t",
    "k",
    "alpha",
    "m",
    "s",
    "trials",
    "converged",
    "avg_calls",
    "avg_time",
    "avg_calls_converged",
];

/// One summary row as it appears in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub t: Option<usize>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub m: Option<usize>,
    pub s: Option<f64>,
    pub trials: usize,
    pub converged: usize,
    pub avg_calls: f64,
    pub avg_time: f64,
    pub avg_calls_converged: Option<f64>,
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    format!("{:.*}", decimals as usize, v)
        .parse()
        .unwrap_or((v * f).round() / f)
}

impl ReportRow {
    /// Summary of `stats`, rounded exactly as the report prints it.
    pub fn from_stats(stats: &BenchStats) -> Self {
        let es = stats.method.es_config();
        Self {
            method: stats.method.label().to_string(),
            t: es.map(|c| c.t),
            k: es.map(|c| c.k),
            alpha: es.map(|c| c.alpha),
            m: es.map(|c| c.m),
            s: es.map(|c| c.s),
            trials: stats.trials,
            converged: stats.converged_count,
            avg_calls: round_to(stats.avg_calls, 1),
            avg_time: round_to(stats.avg_time, 2),
            avg_calls_converged: stats.avg_calls_converged.map(|v| round_to(v, 1)),
        }
    }

    fn cells(&self) -> Vec<String> {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|v| v.to_string()).unwrap_or_default()
        }
        vec![
            self.method.clone(),
            opt(self.t),
            opt(self.k),
            opt(self.alpha),
            opt(self.m),
            opt(self.s),
            self.trials.to_string(),
            self.converged.to_string(),
            format!("{:.1}", self.avg_calls),
            format!("{:.2}", self.avg_time),
            self.avg_calls_converged.map(|v| format!("{v:.1}")).unwrap_or_default(),
        ]
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(flatten)]
    summary: ReportRow,
    master_seed: u64,
    records: &'a [TrialRecord],
}

/// Renders `stats` in `format`.
pub fn render_report(stats: &[BenchStats], format: ReportFormat) -> Result<String> {
    if stats.is_empty() {
        return Err(Error::Config("nothing to report".into()));
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS)?;
            for s in stats {
                w.write_record(ReportRow::from_stats(s).cells())?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Json => {
            let rows: Vec<JsonRow> = stats
                .iter()
                .map(|s| JsonRow {
                    summary: ReportRow::from_stats(s),
                    master_seed: s.master_seed,
                    records: &s.records,
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&serde_json::json!({ "rows": rows }))?;
            text.push('\n');
            Ok(text)
        }
    }
}

/// Writes `stats` to `path`.
pub fn write_report(stats: &[BenchStats], path: &Path, format: ReportFormat) -> Result<()> {
    let text = render_report(stats, format)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Parses a CSV report back into summary rows.
pub fn parse_csv_report(text: &str) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(Error::Config(format!("unexpected report header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
