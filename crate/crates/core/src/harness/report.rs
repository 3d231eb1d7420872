use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::format_float;

use super::runner::{ExperimentSummary, SUMMARY_FILE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub optimizer: String,
    pub final_f: Option<f64>,
    pub avg_mt: Option<f64>,
    /// Geometry-independent, so comparable across optimizers.
    pub avg_grad_norm: Option<f64>,
    pub slope: Option<f64>,
    pub calls: Option<f64>,
    pub seeds_ok: usize,
    pub seeds_aborted: usize,
}

/// One row per (experiment, optimizer), sorted by average `M_t` ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub problem_kind: String,
    pub rows: Vec<ReportRow>,
}

const COLUMNS: [&str; 9] = [
    "experiment",
    "optimizer",
    "final_f",
    "avg_Mt",
    "avg_grad_norm",
    "slope",
    "grad_calls",
    "seeds_ok",
    "seeds_aborted",
];

fn cell(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn short(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into())
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.experiment,
                r.optimizer,
                cell(r.final_f),
                cell(r.avg_mt),
                cell(r.avg_grad_norm),
                cell(r.slope),
                cell(r.calls),
                r.seeds_ok,
                r.seeds_aborted
            );
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let body: Vec<[String; 9]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.experiment.clone(),
                    r.optimizer.clone(),
                    short(r.final_f),
                    short(r.avg_mt),
                    short(r.avg_grad_norm),
                    r.slope.map(|s| format!("{s:.4}")).unwrap_or_else(|| "-".into()),
                    r.calls.map(|c| format!("{c:.0}")).unwrap_or_else(|| "-".into()),
                    r.seeds_ok.to_string(),
                    r.seeds_aborted.to_string(),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
        for row in &body {
            for (w, v) in widths.iter_mut().zip(row) {
                *w = (*w).max(v.len());
            }
        }
        let line = |vals: &[String]| {
            let cells: Vec<String> = vals.iter().zip(&widths).map(|(v, &w)| format!("{v:<w$}")).collect();
            format!("| {} |\n", cells.join(" | "))
        };
        let mut out = format!("Problem: {}\n\n", self.problem_kind);
        out.push_str(&line(&COLUMNS.map(String::from)));
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
        for row in &body {
            out.push_str(&line(row));
        }
        out
    }
}

/// Builds the comparison table; summaries must all describe the same problem.
pub fn compare_report(summaries: &[ExperimentSummary]) -> Result<Report> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::Validation(vec!["report: no summaries".into()]))?;
    let mismatched: Vec<String> = summaries
        .iter()
        .filter(|s| s.problem != first.problem)
        .map(|s| format!("report: experiment `{}` uses a different problem than `{}`", s.name, first.name))
        .collect();
    if !mismatched.is_empty() {
        return Err(Error::Validation(mismatched));
    }
    let mut rows: Vec<ReportRow> = summaries
        .iter()
        .flat_map(|s| {
            s.optimizers.iter().map(move |o| ReportRow {
                experiment: s.name.clone(),
                optimizer: o.label.clone(),
                final_f: o.aggregate.final_f_mean,
                avg_mt: o.aggregate.avg_mt_mean,
                avg_grad_norm: o.aggregate.avg_grad_norm_mean,
                slope: o.aggregate.slope,
                calls: o.aggregate.calls_mean,
                seeds_ok: o.aggregate.seeds_ok,
                seeds_aborted: o.aggregate.seeds_aborted,
            })
        })
        .collect();
    // Stable sort; rows without an average go last.
    rows.sort_by(|a, b| match (a.avg_mt, b.avg_mt) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(Report {
        problem_kind: first.problem_kind.clone(),
        rows,
    })
}

/// `summary.json` in `dir` itself and in its immediate subdirectories, in
/// path order.
pub fn find_summaries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let direct = dir.join(SUMMARY_FILE);
    if direct.is_file() {
        found.push(direct);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for sub in subdirs {
        let p = sub.join(SUMMARY_FILE);
        if p.is_file() {
            found.push(p);
        }
    }
    Ok(found)
}

/// Loads every summary under `dir`, writes `report.md` and `report.csv`
/// next to them and returns the report.
pub fn report_dir(dir: &Path) -> Result<Report> {
    let paths = find_summaries(dir)?;
    if paths.is_empty() {
        return Err(Error::Validation(vec![format!(
            "report: no {SUMMARY_FILE} found under {}",
            dir.display()
        )]));
    }
    let summaries = paths
        .iter()
        .map(|p| ExperimentSummary::load(p))
        .collect::<Result<Vec<_>>>()?;
    let report = compare_report(&summaries)?;
    for (name, text) in [("report.md", report.to_markdown()), ("report.csv", report.to_csv())] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}
