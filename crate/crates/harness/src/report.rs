//! CSV, JSON and markdown reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tfr_core::generator::{DatasetManifest, SetTag};
use tfr_core::metrics::MetricsReport;
use tfr_core::reconstruct::{Method, Normalization};

use crate::config::Experiment;
use crate::error::{HarnessError, Result};

pub const METRICS_HEADER: [&str; 10] = [
    "method", "case", "test_set", "mae", "maxae", "cmae", "mcae", "bmae", "n_samples", "config_hash",
];
const METRIC_NAMES: [&str; 5] = ["mae", "maxae", "cmae", "mcae", "bmae"];

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub case: String,
    pub test_set: SetTag,
    pub mae: f64,
    pub maxae: f64,
    pub cmae: f64,
    pub mcae: f64,
    pub bmae: f64,
    pub n_samples: usize,
    pub config_hash: String,
}

impl MetricsRow {
    pub fn new(method: &str, case: &str, tag: SetTag, m: &MetricsReport, n_samples: usize, hash: &str) -> Self {
        Self {
            method: method.into(),
            case: case.into(),
            test_set: tag,
            mae: m.mae,
            maxae: m.maxae,
            cmae: m.cmae,
            mcae: m.mcae,
            bmae: m.bmae,
            n_samples,
            config_hash: hash.into(),
        }
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.method.clone(),
            self.case.clone(),
            self.test_set.name().into(),
            fmt(self.mae),
            fmt(self.maxae),
            fmt(self.cmae),
            fmt(self.mcae),
            fmt(self.bmae),
            self.n_samples.to_string(),
            self.config_hash.clone(),
        ]
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerSampleRow {
    pub method: String,
    pub test_set: SetTag,
    pub index: usize,
    pub seed: u64,
    pub metrics: MetricsReport,
}

impl PerSampleRow {
    pub fn new(method: &str, tag: SetTag, index: usize, seed: u64, metrics: &MetricsReport) -> Self {
        Self {
            method: method.into(),
            test_set: tag,
            index,
            seed,
            metrics: *metrics,
        }
    }
}

pub fn write_per_sample_csv(path: &Path, rows: &[PerSampleRow], hash: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method", "test_set", "index", "seed", "mae", "maxae", "cmae", "mcae", "bmae", "config_hash",
    ])?;
    for r in rows {
        let mut rec = vec![r.method.clone(), r.test_set.name().into(), r.index.to_string(), r.seed.to_string()];
        rec.extend(r.metrics.values().iter().map(|&v| fmt(v)));
        rec.push(hash.into());
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// An N×N grid as CSV, top row of the domain first.
pub fn grid_csv(values: &[f64], n: usize) -> String {
    let mut s = String::new();
    for row in (0..n).rev() {
        let line: Vec<String> = values[row * n..(row + 1) * n].iter().map(|&v| fmt(v)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub config_name: String,
    pub config_hash: String,
    pub case: String,
    pub grid_n: usize,
    pub monitors: usize,
    pub base_seed: u64,
    pub monitor_seed: u64,
    pub boundary_width: usize,
    pub normalization: Normalization,
    pub generator: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub provenance: Provenance,
    pub baselines: Vec<Method>,
    pub rows: Vec<MetricsRow>,
    pub rank_warnings: BTreeMap<String, BTreeMap<SetTag, usize>>,
    pub seconds: Timings,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub reconstruct: BTreeMap<String, f64>,
    pub evaluate: f64,
}

impl BenchmarkReport {
    pub fn new(
        exp: &Experiment,
        manifest: &DatasetManifest,
        hash: &str,
        rows: Vec<MetricsRow>,
        rank_warnings: BTreeMap<String, BTreeMap<SetTag, usize>>,
        reconstruct: BTreeMap<String, f64>,
        evaluate: f64,
    ) -> Self {
        Self {
            provenance: Provenance {
                tool: format!("tfr-harness {}", env!("CARGO_PKG_VERSION")),
                config_name: exp.config.name.clone(),
                config_hash: hash.into(),
                case: exp.case_label.clone(),
                grid_n: manifest.system.domain.grid_n,
                monitors: manifest.monitors.len(),
                base_seed: manifest.base_seed,
                monitor_seed: manifest.monitor_seed,
                boundary_width: exp.config.metrics.boundary_width,
                normalization: Normalization::default(),
                generator: manifest.generator.clone(),
            },
            baselines: exp.config.baselines.clone(),
            rows,
            rank_warnings,
            seconds: Timings { reconstruct, evaluate },
        }
    }
}

/// Reads metrics CSVs written by [`write_metrics_csv`].
pub fn read_metrics_csv(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    for col in METRICS_HEADER {
        if !headers.iter().any(|h| h == col) {
            return Err(HarnessError::ShapeMismatch(format!(
                "{}: missing column `{col}`",
                path.display()
            )));
        }
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        })
        .collect()
}

/// Markdown tables (methods × test sets), one per case and metric.
pub fn render_markdown(csv_paths: &[&Path]) -> Result<String> {
    let mut rows = Vec::new();
    for p in csv_paths {
        rows.extend(read_metrics_csv(p)?);
    }
    let mut cases: Vec<String> = Vec::new();
    for r in &rows {
        if !cases.contains(&r["case"]) {
            cases.push(r["case"].clone());
        }
    }
    let mut out = String::from("# Reconstruction benchmark\n");
    for case in &cases {
        let case_rows: Vec<_> = rows.iter().filter(|r| &r["case"] == case).collect();
        let hashes: BTreeSet<&str> = case_rows.iter().map(|r| r["config_hash"].as_str()).collect();
        let mut methods: Vec<&str> = Vec::new();
        let mut sets: BTreeSet<&str> = BTreeSet::new();
        for r in &case_rows {
            if !methods.contains(&r["method"].as_str()) {
                methods.push(&r["method"]);
            }
            sets.insert(&r["test_set"]);
        }
        let _ = writeln!(out, "\n## {case}\n");
        for h in &hashes {
            let _ = writeln!(out, "Dataset `{h}`");
        }
        for metric in METRIC_NAMES {
            let _ = writeln!(out, "\n### {} (K)\n", metric.to_uppercase());
            let _ = write!(out, "| method |");
            for s in &sets {
                let _ = write!(out, " {s} |");
            }
            let _ = write!(out, "\n|---|");
            for _ in &sets {
                let _ = write!(out, "---:|");
            }
            out.push('\n');
            for m in &methods {
                let _ = write!(out, "| {m} |");
                for s in &sets {
                    let cell = case_rows
                        .iter()
                        .find(|r| r["method"] == *m && r["test_set"] == *s)
                        .map(|r| r[metric].as_str())
                        .unwrap_or("–");
                    let _ = write!(out, " {cell} |");
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_markdown() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = MetricsReport {
            mae: 1.0,
            maxae: 2.5,
            cmae: 1.25,
            mcae: 2.0,
            bmae: 0.5,
        };
        let rows = vec![
            MetricsRow::new("knn_interp", "HSink", SetTag::Test0, &m, 10, "abc"),
            MetricsRow::new("gpr", "HSink", SetTag::Test1, &m, 10, "abc"),
        ];
        write_metrics_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "method,case,test_set,mae,maxae,cmae,mcae,bmae,n_samples,config_hash"
        );
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "knn_interp,HSink,Test0,1.000000,2.500000,1.250000,2.000000,0.500000,10,abc"
        );
        let md = render_markdown(&[&path]).unwrap();
        assert!(md.contains("| knn_interp | 1.000000 | – |"));
        assert!(md.contains("| gpr | – | 1.000000 |"));
    }

    #[test]
    fn grid_csv_puts_top_row_first() {
        assert_eq!(grid_csv(&[1.0, 2.0, 3.0, 4.0], 2), "3.000000,4.000000\n1.000000,2.000000\n");
    }
}
