//! Plain-text datasets and CSV plot data.
//!
//! Datasets are one observation per line, coordinates separated by
//! whitespace or commas; blank lines and `#` comments are skipped. Every CSV
//! file starts with a header line and is written even when it has no rows.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use msinfer_core::em::EmState;
use msinfer_core::infer::{CellStatus, Extraction};
use msinfer_core::landscape::{BasinMap, CellLabel};
use msinfer_core::Dataset;
use serde::Serialize;

use crate::coverage::CoverageReport;

pub fn parse_dataset(text: &str) -> anyhow::Result<Dataset> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().with_context(|| format!("line {}: `{t}` is not a number", i + 1)))
            .collect::<anyhow::Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                bail!("line {}: expected {} values, found {}", i + 1, first.len(), row.len());
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("dataset has no observations");
    }
    Ok(Dataset::from_rows(&rows)?)
}

pub fn read_dataset(path: &Path) -> anyhow::Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dataset(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn format_dataset(data: &Dataset) -> String {
    let mut out = String::new();
    for row in data.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_dataset(path: &Path, data: &Dataset) -> anyhow::Result<()> {
    fs::write(path, format_dataset(data)).with_context(|| format!("writing {}", path.display()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn csv_writer(path: &Path, header: &[String]) -> anyhow::Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header)?;
    Ok(w)
}

fn finish(mut w: csv::Writer<fs::File>) -> anyhow::Result<()> {
    w.flush()?;
    Ok(())
}

fn coord_header(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (0..d).map(move |j| format!("{prefix}{j}"))
}

fn num(v: f64) -> String {
    v.to_string()
}

/// `cell, theta0.., label` with the label a basin index or `unresolved`.
pub fn emit_basin_map(path: &Path, map: &BasinMap) -> anyhow::Result<()> {
    let d = map.grid.domain().dim();
    let header: Vec<String> = std::iter::once("cell".to_string()).chain(coord_header("theta", d)).chain(["label".into()]).collect();
    let mut w = csv_writer(path, &header)?;
    for (c, label) in map.labels.iter().enumerate() {
        let mut rec = vec![c.to_string()];
        rec.extend(map.grid.cell_center(c).into_iter().map(num));
        rec.push(match label {
            CellLabel::Basin(i) => i.to_string(),
            CellLabel::Unresolved => "unresolved".into(),
        });
        w.write_record(&rec)?;
    }
    finish(w)
}

/// `cell, theta0.., status` for an extracted region.
pub fn emit_region(path: &Path, region: &Extraction) -> anyhow::Result<()> {
    let d = region.grid.domain().dim();
    let header: Vec<String> = std::iter::once("cell".to_string()).chain(coord_header("theta", d)).chain(["status".into()]).collect();
    let mut w = csv_writer(path, &header)?;
    for (c, status) in region.cells.iter().enumerate() {
        let mut rec = vec![c.to_string()];
        rec.extend(region.grid.cell_center(c).into_iter().map(num));
        rec.push(
            match status {
                CellStatus::Member => "member",
                CellStatus::Outside => "outside",
                CellStatus::Excluded => "excluded",
            }
            .into(),
        );
        w.write_record(&rec)?;
    }
    finish(w)
}

/// `run, step, theta0.., value`; one block of rows per trajectory.
pub fn emit_trajectories(path: &Path, dim: usize, trajectories: &[Vec<(Vec<f64>, f64)>]) -> anyhow::Result<()> {
    let header: Vec<String> =
        ["run".to_string(), "step".into()].into_iter().chain(coord_header("theta", dim)).chain(["value".into()]).collect();
    let mut w = csv_writer(path, &header)?;
    for (run, path) in trajectories.iter().enumerate() {
        for (step, (x, v)) in path.iter().enumerate() {
            let mut rec = vec![run.to_string(), step.to_string()];
            rec.extend(x.iter().copied().map(num));
            rec.push(num(*v));
            w.write_record(&rec)?;
        }
    }
    finish(w)
}

/// `index, value` for sorted bootstrap replicates.
pub fn emit_values(path: &Path, values: &[f64]) -> anyhow::Result<()> {
    let mut w = csv_writer(path, &["index".into(), "value".into()])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), num(*v)])?;
    }
    finish(w)
}

/// `iteration, loglik, theta0..`.
pub fn emit_em_trace(path: &Path, dim: usize, trace: &[EmState]) -> anyhow::Result<()> {
    let header: Vec<String> = ["iteration".to_string(), "loglik".into()].into_iter().chain(coord_header("theta", dim)).collect();
    let mut w = csv_writer(path, &header)?;
    for s in trace {
        let mut rec = vec![s.t.to_string(), num(s.loglik)];
        rec.extend(s.theta.iter().copied().map(num));
        w.write_record(&rec)?;
    }
    finish(w)
}

/// One row per `(method, target)` with the hit rate and its standard error.
pub fn emit_report(path: &Path, report: &CoverageReport) -> anyhow::Result<()> {
    let header: Vec<String> =
        ["method", "target", "trials", "hits", "rate", "se", "threshold", "tolerance", "pass"].iter().map(|s| s.to_string()).collect();
    let mut w = csv_writer(path, &header)?;
    for m in &report.methods {
        let rows = [
            ("precision-set", m.hits_precision_set, m.rate_precision_set, m.se_precision_set, m.target_precision_set, m.tolerance_precision_set, m.pass_precision_set),
            ("mle", m.hits_mle, m.rate_mle, m.se_mle, m.target_mle, m.tolerance_mle, m.pass_mle),
        ];
        for (target, hits, rate, se, thr, tol, pass) in rows {
            w.write_record([m.method.name().into(), target.into(), m.trials.to_string(), hits.to_string(), num(rate), num(se), num(thr), num(tol), pass.to_string()])?;
        }
    }
    if let Some(t) = &report.type1 {
        w.write_record([
            "two-sample".into(),
            "type1".into(),
            t.trials.to_string(),
            t.rejections.to_string(),
            num(t.rate),
            num(t.se),
            num(t.nominal),
            num(t.tolerance),
            t.pass.to_string(),
        ])?;
    }
    finish(w)
}
