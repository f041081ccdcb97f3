//! CSV and Markdown result tables.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::loss::LossSpec;
use crate::model::Variant;

/// One evaluated split of one run, or an average over runs when `dim` is
/// `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub model: Variant,
    pub dim: Option<usize>,
    pub loss: String,
    pub seed: Option<u64>,
    pub noise: f64,
    pub split: String,
    pub params: usize,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

impl ReportRow {
    pub fn from_eval(
        dataset: &str,
        variant: Variant,
        dim: usize,
        loss: &LossSpec,
        seed: u64,
        noise: f64,
        report: &EvalReport,
    ) -> Self {
        Self {
            dataset: dataset.to_owned(),
            model: variant,
            dim: Some(dim),
            loss: loss.to_string(),
            seed: Some(seed),
            noise,
            split: report.split.clone(),
            params: report.param_count,
            mrr: report.mrr,
            hits1: report.hits1,
            hits3: report.hits3,
            hits10: report.hits10,
        }
    }

    pub fn is_average(&self) -> bool {
        self.dim.is_none()
    }
}

/// Mean of `params` truncated toward zero.
pub fn average_params(params: &[usize]) -> usize {
    if params.is_empty() {
        return 0;
    }
    params.iter().sum::<usize>() / params.len()
}

/// Averages `rows` (which should share dataset, model, loss, noise and split).
pub fn average(rows: &[ReportRow]) -> Option<ReportRow> {
    let first = rows.first()?;
    let n = rows.len() as f64;
    let mean = |f: fn(&ReportRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Some(ReportRow {
        dim: None,
        seed: None,
        params: average_params(&rows.iter().map(|r| r.params).collect::<Vec<_>>()),
        mrr: mean(|r| r.mrr),
        hits1: mean(|r| r.hits1),
        hits3: mean(|r| r.hits3),
        hits10: mean(|r| r.hits10),
        ..first.clone()
    })
}

/// One average row per (dataset, model, loss, noise, split) group of
/// non-average rows, in order of first appearance.
pub fn group_averages(rows: &[ReportRow]) -> Vec<ReportRow> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<ReportRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.is_average()) {
        let key = format!("{}\t{}\t{}\t{}\t{}", r.dataset, r.model, r.loss, r.noise, r.split);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r.clone());
    }
    order.iter().filter_map(|k| average(&groups[k])).collect()
}

pub fn write_csv(rows: &[ReportRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Malformed(e.to_string()))
}

pub fn read_csv(input: impl Read) -> Result<Vec<ReportRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Malformed(format!("{other:?}")),
        }
    } else {
        Error::Malformed(e.to_string())
    }
}

/// `1234567` → `1,234,567`.
pub fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// `0.5172` → `.517`; `1.0` → `1.000`.
pub fn metric(x: f64) -> String {
    let s = format!("{x:.3}");
    s.strip_prefix('0').map(str::to_owned).unwrap_or(s)
}

/// Markdown table with columns `|Θ|, MRR, @1, @3, @10` after the identifying
/// columns.
pub fn markdown(rows: &[ReportRow]) -> String {
    let mut out = String::from("| Dataset | Model | d | Loss | Noise | Split | |Θ| | MRR | @1 | @3 | @10 |\n");
    out.push_str("|---|---|---:|---|---:|---|---:|---:|---:|---:|---:|\n");
    for r in rows {
        let dim = r.dim.map_or_else(|| "avg.".to_owned(), |d| d.to_string());
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.dataset,
            r.model.display_name(),
            dim,
            r.loss,
            r.noise,
            r.split,
            thousands(r.params),
            metric(r.mrr),
            metric(r.hits1),
            metric(r.hits3),
            metric(r.hits10),
        ));
    }
    out
}
