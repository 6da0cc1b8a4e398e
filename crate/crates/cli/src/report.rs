//! Aggregation of `eval` outputs across seeds into plot-ready tables.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{create_dir, opt, write_csv, write_json, ABSENT};
use crate::Format;

/// Metric columns aggregated by the report, in output order.
pub const METRICS: [&str; 11] = [
    "n",
    "accuracy",
    "ece",
    "mean_diff",
    "q1",
    "q2",
    "q3",
    "pos_outlier_count",
    "pos_outlier_mean",
    "neg_outlier_count",
    "neg_outlier_mean",
];

/// One metrics-CSV row keyed by column name.
#[derive(Debug, Clone)]
struct Row {
    fields: BTreeMap<String, String>,
}

impl Row {
    fn get(&self, col: &str) -> Option<&str> {
        self.fields.get(col).map(String::as_str)
    }

    fn text(&self, col: &str) -> String {
        self.get(col).unwrap_or(ABSENT).to_string()
    }

    /// `None` when the column is missing or marked absent.
    fn number(&self, col: &str, path: &Path) -> CliResult<Option<f64>> {
        match self.get(col) {
            None | Some("" | ABSENT) => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                CliError::Data(format!("{}: column `{col}` holds non-numeric `{v}`", path.display()))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub source: String,
    pub metric: String,
    pub n_seeds: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; absent below two seeds.
    pub sd: Option<f64>,
    pub seeds: String,
    pub config_digests: String,
}

fn files_with(dir: &Path, prefix: &str) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = Vec::new();
    for e in entries {
        let path = e.map_err(|e| CliError::io(dir, e))?.path();
        let matches = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with(prefix) && n.ends_with(".csv"));
        if matches && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn read_rows(path: &Path) -> CliResult<(Vec<String>, Vec<Row>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    for col in ["scheme", "seed", "source"] {
        if !header.iter().any(|h| h == col) {
            return Err(CliError::Data(format!("{}: missing column `{col}`", path.display())));
        }
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        rows.push(Row {
            fields: header.iter().cloned().zip(rec.iter().map(str::to_string)).collect(),
        });
    }
    Ok((header, rows))
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    });
    (Some(mean), sd)
}

fn joined(set: &BTreeSet<String>) -> String {
    if set.is_empty() {
        ABSENT.to_string()
    } else {
        set.iter().cloned().collect::<Vec<_>>().join(";")
    }
}

/// Mean ± sd over seeds per (scheme, source, metric).
fn summarize(files: &[(PathBuf, Vec<Row>)]) -> CliResult<Vec<SummaryRow>> {
    let mut groups: BTreeMap<(String, String), Vec<(&Path, &Row)>> = BTreeMap::new();
    for (path, rows) in files {
        for r in rows {
            groups
                .entry((r.text("scheme"), r.text("source")))
                .or_default()
                .push((path, r));
        }
    }
    let mut out = Vec::new();
    for ((scheme, source), rows) in &groups {
        for metric in METRICS {
            let mut values = Vec::new();
            let mut seeds = BTreeSet::new();
            let mut digests = BTreeSet::new();
            for (path, r) in rows {
                if let Some(v) = r.number(metric, path)? {
                    values.push(v);
                    seeds.insert(r.text("seed"));
                    if let Some(d) = r.get("config_digest") {
                        digests.insert(d.to_string());
                    }
                }
            }
            let (mean, sd) = mean_sd(&values);
            out.push(SummaryRow {
                scheme: scheme.clone(),
                source: source.clone(),
                metric: metric.to_string(),
                n_seeds: values.len(),
                mean,
                sd,
                seeds: joined(&seeds),
                config_digests: joined(&digests),
            });
        }
    }
    Ok(out)
}

fn boxplot_rows(files: &[(PathBuf, Vec<Row>)], fence: f64) -> CliResult<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for (path, rows) in files {
        for r in rows {
            let q1 = r.number("q1", path)?;
            let q3 = r.number("q3", path)?;
            let fences = q1.zip(q3).map(|(a, b)| (a - fence * (b - a), b + fence * (b - a)));
            out.push(vec![
                r.text("scheme"),
                r.text("seed"),
                r.text("source"),
                r.text("n"),
                opt(q1),
                opt(r.number("q2", path)?),
                opt(q3),
                opt(fences.map(|f| f.0)),
                opt(fences.map(|f| f.1)),
                r.text("pos_outlier_count"),
                r.text("pos_outlier_mean"),
                r.text("neg_outlier_count"),
                r.text("neg_outlier_mean"),
                r.text("config_digest"),
            ]);
        }
    }
    out.sort();
    Ok(out)
}

/// Reads `metrics-*.csv` and `reliability-*.csv` from `run_dir`, writes
/// `summary.csv` (or `.json`), `boxplot.csv` and `reliability.csv` to `out`.
pub fn report(run_dir: &Path, out: &Path, fence: f64, format: Format) -> CliResult<Vec<SummaryRow>> {
    if !run_dir.is_dir() {
        return Err(CliError::Data(format!("run directory {} does not exist", run_dir.display())));
    }
    let metric_files = files_with(run_dir, "metrics-")?;
    if metric_files.is_empty() {
        return Err(CliError::Data(format!("no metrics CSV files in {}", run_dir.display())));
    }
    let mut files = Vec::with_capacity(metric_files.len());
    for p in metric_files {
        let (_, rows) = read_rows(&p)?;
        files.push((p, rows));
    }
    let summary = summarize(&files)?;
    create_dir(out)?;

    match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = summary
                .iter()
                .map(|s| {
                    vec![
                        s.scheme.clone(),
                        s.source.clone(),
                        s.metric.clone(),
                        s.n_seeds.to_string(),
                        opt(s.mean),
                        opt(s.sd),
                        s.seeds.clone(),
                        s.config_digests.clone(),
                    ]
                })
                .collect();
            write_csv(
                &out.join("summary.csv"),
                &["scheme", "source", "metric", "n_seeds", "mean", "sd", "seeds", "config_digests"],
                &rows,
            )?;
        }
        Format::Json => write_json(&out.join("summary.json"), &summary)?,
    }

    write_csv(
        &out.join("boxplot.csv"),
        &[
            "scheme",
            "seed",
            "source",
            "n",
            "q1",
            "q2",
            "q3",
            "lower_fence",
            "upper_fence",
            "pos_outlier_count",
            "pos_outlier_mean",
            "neg_outlier_count",
            "neg_outlier_mean",
            "config_digest",
        ],
        &boxplot_rows(&files, fence)?,
    )?;

    let mut header: Option<Vec<String>> = None;
    let mut bins = Vec::new();
    for p in files_with(run_dir, "reliability-")? {
        let (h, rows) = read_rows(&p)?;
        match &header {
            Some(prev) if *prev != h => {
                return Err(CliError::Data(format!("{}: reliability columns differ", p.display())));
            }
            _ => header = Some(h.clone()),
        }
        bins.extend(rows.iter().map(|r| h.iter().map(|c| r.text(c)).collect::<Vec<_>>()));
    }
    if let Some(h) = header {
        let h: Vec<&str> = h.iter().map(String::as_str).collect();
        write_csv(&out.join("reliability.csv"), &h, &bins)?;
    }

    for s in summary.iter().filter(|s| s.metric == "accuracy" || s.metric == "ece") {
        println!(
            "{:<12} {:<12} {:<10} {} ± {} (n = {})",
            s.scheme,
            s.source,
            s.metric,
            opt(s.mean),
            opt(s.sd),
            s.n_seeds
        );
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sd_examples() {
        let (m, sd) = mean_sd(&[0.02, 0.04]);
        assert!((m.unwrap() - 0.03).abs() < 1e-15);
        assert!((sd.unwrap() - 0.02f64.sqrt() / 10.0).abs() < 1e-15);
        assert_eq!(mean_sd(&[0.7]), (Some(0.7), None));
        assert_eq!(mean_sd(&[]), (None, None));
    }
}
