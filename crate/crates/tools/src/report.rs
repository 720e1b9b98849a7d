// SPDX-License-Identifier: Apache-2.0

//! Rendering of reports, transfer matrices and sweep curves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use ccs_core::eval::{AccuracyRecord, EvalReport, SweepCurve, TransferMatrix};
use serde_json::Value;

use crate::{ToolError, ToolResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Self::Json),
            "table" | "table-text" | "text" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown format {other:?} (json, table, csv)")),
        }
    }
}

pub const CSV_HEADER: [&str; 6] = ["dataset", "prompt", "variant", "method", "accuracy", "sign"];

/// Percent with one decimal, e.g. `0.712 → "71.2"`.
pub fn percent(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

/// A `mean(std)` cell in percent, e.g. `71.2(3.2)`.
pub fn mean_std_cell(mean: f64, std: Option<f64>) -> String {
    match std {
        Some(s) => format!("{}({})", percent(mean), percent(s)),
        None => percent(mean),
    }
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => render_csv(&report.per_prompt_acc),
        ReportFormat::Table => render_table(report),
    }
}

fn render_csv(records: &[AccuracyRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([
            r.dataset.as_str(),
            r.prompt.as_str(),
            r.variant.as_str(),
            r.method.as_str(),
            &r.accuracy.to_string(),
            &r.sign.value().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn row_label(method: &str, variant: &str) -> String {
    if variant == "regular" {
        method.to_string()
    } else {
        format!("{method}[{variant}]")
    }
}

/// One row per (method, variant), one column per dataset, then the average.
fn render_table(report: &EvalReport) -> String {
    let datasets: BTreeSet<&str> = report
        .per_dataset_mean
        .iter()
        .map(|g| g.dataset.as_str())
        .collect();
    let mut cells: BTreeMap<(String, &str), String> = BTreeMap::new();
    for g in &report.per_dataset_mean {
        let std = report
            .prompt_std
            .iter()
            .find(|s| s.dataset == g.dataset && s.method == g.method && s.variant == g.variant)
            .map(|s| s.value);
        cells.insert(
            (row_label(&g.method, &g.variant), g.dataset.as_str()),
            mean_std_cell(g.value, std),
        );
    }
    let mut header = vec!["method".to_string()];
    header.extend(datasets.iter().map(|d| d.to_string()));
    header.push("avg".to_string());
    let mut rows = vec![header];
    for m in &report.grand {
        let label = row_label(&m.method, &m.variant);
        let mut row = vec![label.clone()];
        for d in &datasets {
            row.push(cells.get(&(label.clone(), *d)).cloned().unwrap_or_else(|| "-".into()));
        }
        row.push(mean_std_cell(m.mean, m.std));
        rows.push(row);
    }
    align(&rows)
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|j| rows.iter().filter_map(|r| r.get(j)).map(|c| c.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, c)| format!("{c:<w$}", w = widths[j]))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

/// Reads report inputs: an [`EvalReport`] object, a single record, or an
/// array of records. Returns the contained records.
pub fn records_from_json(path: &std::path::Path, v: Value) -> ToolResult<Vec<AccuracyRecord>> {
    fn parse<T: serde::de::DeserializeOwned>(path: &std::path::Path, v: Value) -> ToolResult<T> {
        serde_json::from_value(v).map_err(|e| ToolError::json(path, e))
    }
    match v {
        Value::Array(items) => items.into_iter().map(|v| parse(path, v)).collect(),
        Value::Object(ref o) if o.contains_key("per_prompt_acc") => {
            let report: EvalReport = parse(path, v)?;
            Ok(report.per_prompt_acc)
        }
        other => Ok(vec![parse(path, other)?]),
    }
}

pub fn parse_report(text: &str) -> ToolResult<EvalReport> {
    serde_json::from_str(text).map_err(|e| ToolError::json("<report>", e))
}

pub fn transfer_csv(m: &TransferMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["train".to_string()];
    header.extend(m.cols.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for (name, row) in m.rows.iter().zip(&m.values) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.map_or_else(String::new, |x| x.to_string())));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn sweep_csv(c: &SweepCurve) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "mean_acc", "std_acc", "trials", "failures"])
        .expect("in-memory write");
    for i in 0..c.k_values.len() {
        w.write_record([
            c.k_values[i].to_string(),
            c.mean_acc[i].to_string(),
            c.std_acc[i].to_string(),
            c.trials.to_string(),
            c.failures[i].to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ccs_core::Sign;

    fn rec(dataset: &str, prompt: &str, method: &str, accuracy: f64) -> AccuracyRecord {
        AccuracyRecord {
            dataset: dataset.into(),
            prompt: prompt.into(),
            variant: "regular".into(),
            method: method.into(),
            accuracy,
            sign: Sign::Positive,
        }
    }

    #[test]
    fn cell_format() {
        assert_eq!(mean_std_cell(0.712, Some(0.032)), "71.2(3.2)");
        assert_eq!(mean_std_cell(0.5, None), "50.0");
    }

    #[test]
    fn empty_report_is_headers_only() {
        let r = EvalReport::from_records(vec![]);
        assert_eq!(render_report(&r, ReportFormat::Table), "method  avg\n");
        assert_eq!(
            render_report(&r, ReportFormat::Csv),
            "dataset,prompt,variant,method,accuracy,sign\n"
        );
    }

    #[test]
    fn table_and_json_round_trip() {
        let r = EvalReport::from_records(vec![
            rec("imdb", "0", "ccs", 0.6),
            rec("imdb", "1", "ccs", 0.8),
            rec("imdb", "0", "lr", 0.9),
        ]);
        let table = render_report(&r, ReportFormat::Table);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0].split_whitespace().collect::<Vec<_>>(), ["method", "imdb", "avg"]);
        assert_eq!(
            lines[1].split_whitespace().collect::<Vec<_>>(),
            ["ccs", "70.0(14.1)", "70.0(14.1)"]
        );
        assert_eq!(lines[2].split_whitespace().collect::<Vec<_>>(), ["lr", "90.0", "90.0"]);

        let json = render_report(&r, ReportFormat::Json);
        assert_eq!(parse_report(&json).unwrap(), r);

        let csv = render_report(&r, ReportFormat::Csv);
        assert_eq!(csv.lines().nth(1).unwrap(), "imdb,0,regular,ccs,0.6,1");
    }

    #[test]
    fn records_from_any_shape() {
        let p = std::path::Path::new("r.json");
        let one = serde_json::to_value(rec("a", "0", "ccs", 0.7)).unwrap();
        assert_eq!(records_from_json(p, one.clone()).unwrap().len(), 1);
        let many = Value::Array(vec![one.clone(), one]);
        assert_eq!(records_from_json(p, many).unwrap().len(), 2);
        let report = EvalReport::from_records(vec![rec("a", "0", "ccs", 0.7)]);
        let v = serde_json::to_value(&report).unwrap();
        assert_eq!(records_from_json(p, v).unwrap(), report.per_prompt_acc);
    }
}
