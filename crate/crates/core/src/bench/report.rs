//! Report rendering.
//!
//! * `markdown`: success grid, preamble/postamble grid, comment grid,
//!   timing averages and a failure list.
//! * `csv`: one [`RunRecord`] per row with a header; [`parse_csv`] reads it back.
//! * `plot-data`: JSON with one point per (model, intention).

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use super::{BenchmarkReport, RunMode, RunRecord};

pub const PLOT_DATA_FORMAT: &str = "intent-forge/plot-data@1";

const YES: &str = "✓";
const NO: &str = "✗";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    PlotData,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown report format `{0}` (expected markdown, csv or plot-data)")]
    UnknownFormat(String),
    #[error("invalid csv report: {0}")]
    Csv(String),
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, ReportError> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "plot-data" | "plot" => Ok(ReportFormat::PlotData),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

pub fn render_report(report: &BenchmarkReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => markdown(report),
        ReportFormat::Csv => csv_text(&report.records),
        ReportFormat::PlotData => plot_data(report),
    }
}

fn mark(b: bool) -> &'static str {
    if b {
        YES
    } else {
        NO
    }
}

fn grid(out: &mut String, report: &BenchmarkReport, totals: &[&str], cell: impl Fn(&RunRecord) -> bool) {
    let mut header = String::from("| Model |");
    let mut rule = String::from("|---|");
    for i in &report.intentions {
        let _ = write!(header, " {i} |");
        rule.push_str(":-:|");
    }
    for t in totals {
        let _ = write!(header, " {t} |");
        rule.push_str("--:|");
    }
    out.push_str(&header);
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for agg in &report.aggregates {
        let mut row = format!("| {} |", agg.model_name);
        let mut yes = 0;
        let mut no = 0;
        for i in &report.intentions {
            match report.record(&agg.model_name, *i) {
                Some(r) => {
                    let v = cell(r);
                    if v {
                        yes += 1
                    } else {
                        no += 1
                    }
                    let _ = write!(row, " {} |", mark(v));
                }
                None => row.push_str(" - |"),
            }
        }
        let _ = write!(row, " {yes} |");
        if totals.len() > 1 {
            let _ = write!(row, " {no} |");
        }
        out.push_str(&row);
        out.push('\n');
    }
    out.push('\n');
}

fn markdown(report: &BenchmarkReport) -> String {
    let mut out = String::from("# Intent resolution benchmark\n\n");
    match report.mode {
        RunMode::Fixture => {
            let _ = writeln!(
                out,
                "Mode: fixture replay{}.\n",
                report.source.as_deref().map(|s| format!(" ({s})")).unwrap_or_default()
            );
        }
        RunMode::Live => out.push_str("Mode: live.\n\n"),
    }

    out.push_str("## Successful resolutions\n\n");
    grid(&mut out, report, &[YES, NO], |r| r.success);

    out.push_str("## Preamble and postamble\n\n");
    grid(&mut out, report, &["Total"], |r| r.has_preamble || r.has_postamble);

    out.push_str("## Code comments\n\n");
    grid(&mut out, report, &["Total"], |r| r.has_comments);
    out.push_str("Trailing `#` comments and docstrings both count as comments.\n\n");

    out.push_str("## Average response time and time to first token\n\n");
    out.push_str("| Model | Avg. response time (s) | Avg. time to first token (ms) |\n|---|--:|--:|\n");
    for agg in &report.aggregates {
        let _ = writeln!(out, "| {} | {:.2} | {:.1} |", agg.model_name, agg.avg_response_time_s, agg.avg_ttft_ms);
    }
    out.push('\n');
    out.push_str("Times are measured from request send.");
    if report.mode == RunMode::Fixture {
        out.push_str(" Fixture timings are a reconstruction replayed on a virtual clock, not a measurement.");
    }
    out.push_str("\n\n");

    let failures: Vec<&RunRecord> = report.records.iter().filter(|r| !r.success).collect();
    if !failures.is_empty() {
        out.push_str("## Failures\n\n| Model | Intention | Reason | Detail |\n|---|--:|---|---|\n");
        for r in failures {
            let reason = r.failure_reason.map(|f| f.as_str()).unwrap_or("-");
            let detail = r.detail.as_deref().unwrap_or("").replace('|', "\\|").replace('\n', " ");
            let _ = writeln!(out, "| {} | {} | {} | {} |", r.model_name, r.intention_id, reason, detail);
        }
        out.push('\n');
    }
    out
}

fn csv_text(records: &[RunRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        let _ = w.write_record([
            "model_name",
            "intention_id",
            "success",
            "failure_reason",
            "has_preamble",
            "has_postamble",
            "has_comments",
            "ttft_ms",
            "response_time_s",
            "trace_ref",
            "detail",
        ]);
    }
    for r in records {
        w.serialize(r).expect("records serialize to csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

/// Reads records written by the csv format.
pub fn parse_csv(text: &str) -> Result<Vec<RunRecord>, ReportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader.deserialize().collect::<Result<Vec<RunRecord>, _>>().map_err(|e| ReportError::Csv(e.to_string()))
}

#[derive(Serialize)]
struct PlotPoint<'a> {
    model: &'a str,
    intention_id: u32,
    ttft_ms: f64,
    response_time_s: f64,
    success: bool,
}

#[derive(Serialize)]
struct PlotData<'a> {
    format: &'static str,
    mode: RunMode,
    points: Vec<PlotPoint<'a>>,
}

fn plot_data(report: &BenchmarkReport) -> String {
    let data = PlotData {
        format: PLOT_DATA_FORMAT,
        mode: report.mode,
        points: report
            .records
            .iter()
            .map(|r| PlotPoint {
                model: &r.model_name,
                intention_id: r.intention_id,
                ttft_ms: r.ttft_ms,
                response_time_s: r.response_time_s,
                success: r.success,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&data).expect("plot data serializes");
    s.push('\n');
    s
}
