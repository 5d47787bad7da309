//! The three phases: generate a dataset, reconstruct its test sets with each
//! baseline, evaluate the reconstructions.
//!
//! Output tree under the experiment's `out_dir`:
//!
//! ```text
//! dataset/manifest.json, dataset/<set>.tfrs
//! predictions/<method>/manifest.json, predictions/<method>/<set>.tfrs
//! predictions/mlp_vector/weights.tfrw
//! predictions/timings.json
//! reports/metrics.csv, reports/report.json, reports/per_sample.csv, reports/error_maps/
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tfr_core::generator::container::{create_record_file, read_record_file, Record, RecordHeader};
use tfr_core::generator::{read_manifest, read_set, set_file_name, write_dataset, DatasetManifest, Sample, SetTag, MANIFEST_FILE};
use tfr_core::layout::rasterize;
use tfr_core::metrics::{aggregate, build_masks, evaluate as evaluate_sample, MetricsReport};
use tfr_core::reconstruct::{Method, MlpVectorModel, Normalization, Reconstructor};
use tfr_core::{TemperatureField, TfrError};

use crate::config::Experiment;
use crate::error::{io_err, Context, HarnessError, Result};
use crate::report::{write_metrics_csv, BenchmarkReport, MetricsRow, PerSampleRow};

pub const PREDICTIONS_MANIFEST: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const WEIGHTS_FILE: &str = "weights.tfrw";

/// SHA-256 of a dataset's manifest bytes; identifies the configuration a
/// dataset was generated from.
pub fn dataset_hash(dataset_dir: &Path) -> Result<String> {
    let path = dataset_dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateSummary {
    pub dataset: PathBuf,
    pub config_hash: String,
    pub grid_n: usize,
    pub monitors: usize,
    pub sets: BTreeMap<SetTag, usize>,
    pub seconds: f64,
}

pub fn generate(exp: &Experiment) -> Result<GenerateSummary> {
    let start = Instant::now();
    let plan = exp.plan()?;
    let dir = exp.dataset_dir();
    let manifest = write_dataset(&plan, &dir).context("generating dataset")?;
    Ok(GenerateSummary {
        config_hash: dataset_hash(&dir)?,
        dataset: dir,
        grid_n: manifest.system.domain.grid_n,
        monitors: manifest.monitors.len(),
        sets: manifest.sets.iter().map(|s| (s.tag, s.count)).collect(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub tag: SetTag,
    pub count: usize,
    pub file: String,
    /// Samples whose polynomial design matrix was rank deficient.
    #[serde(default)]
    pub rank_warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionsManifest {
    pub method: Method,
    pub config_hash: String,
    pub grid_n: usize,
    pub normalization: Normalization,
    #[serde(default)]
    pub weights: Option<String>,
    pub sets: Vec<PredictionSet>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructSummary {
    pub predictions: PathBuf,
    pub config_hash: String,
    pub methods: Vec<String>,
    pub seconds: BTreeMap<String, f64>,
}

fn field_header(n: usize) -> RecordHeader {
    RecordHeader {
        grid_n: n as u32,
        sources: 0,
        monitors: 0,
    }
}

fn write_fields(path: &Path, n: usize, fields: &[TemperatureField]) -> Result<()> {
    let mut w = create_record_file(path, field_header(n)).context(path.display().to_string())?;
    for f in fields {
        w.push(&Record {
            intensities: Vec::new(),
            monitor_temps: Vec::new(),
            field: f.values().to_vec(),
        })
        .context(path.display().to_string())?;
    }
    w.finish().context(path.display().to_string())?;
    Ok(())
}

fn load_test_sets(dir: &Path, manifest: &DatasetManifest) -> Result<Vec<(SetTag, Vec<Sample>)>> {
    manifest
        .sets
        .iter()
        .filter(|s| s.tag.is_test())
        .map(|s| Ok((s.tag, read_set(dir, manifest, s.tag).context(format!("reading {} set", s.tag))?)))
        .collect()
}

fn sample_error(tag: SetTag, index: usize) -> impl Fn(TfrError) -> TfrError {
    move |e| TfrError::Sample {
        set: tag.name().into(),
        index,
        source: Box::new(e),
    }
}

/// Runs every configured baseline over every test set of the dataset in
/// `dataset_dir`.
pub fn reconstruct(exp: &Experiment, dataset_dir: &Path) -> Result<ReconstructSummary> {
    let manifest = read_manifest(dataset_dir).context("reading dataset manifest")?;
    let hash = dataset_hash(dataset_dir)?;
    let monitors = &manifest.monitors;
    exp.validate_baselines(monitors.len())?;
    let n = manifest.system.domain.grid_n;
    let has_train = manifest.set(SetTag::Train).is_some_and(|s| s.count > 0);
    if !has_train && exp.config.baselines.iter().any(Method::needs_training) {
        return Err(HarnessError::MissingTrainSet);
    }
    let tests = load_test_sets(dataset_dir, &manifest)?;
    let out = exp.predictions_dir();
    let mut seconds = BTreeMap::new();

    for method in &exp.config.baselines {
        let start = Instant::now();
        let dir = out.join(method.name());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut weights = None;
        let reconstructor = match method {
            Method::MlpVector(cfg) => {
                let train = read_set(dataset_dir, &manifest, SetTag::Train).context("reading Train set")?;
                let obs: Vec<_> = train.iter().map(|s| s.observation.clone()).collect();
                let fields: Vec<_> = train.into_iter().map(|s| s.field).collect();
                let model = MlpVectorModel::train(&obs, &fields, cfg).context("training mlp_vector")?;
                model.save(dir.join(WEIGHTS_FILE)).context("writing weights")?;
                weights = Some(WEIGHTS_FILE.to_string());
                Reconstructor::Vector(model)
            }
            other => Reconstructor::per_instance(other.clone()).context(method.name())?,
        };
        let mut sets = Vec::new();
        for (tag, samples) in &tests {
            let results: Vec<_> = samples
                .par_iter()
                .enumerate()
                .map(|(i, s)| reconstructor.reconstruct(&s.observation, monitors).map_err(sample_error(*tag, i)))
                .collect::<std::result::Result<_, _>>()
                .context(format!("{} on {tag}", method.name()))?;
            let rank_warnings = results.iter().filter(|r| r.rank_warning.is_some()).count();
            let fields: Vec<_> = results.into_iter().map(|r| r.field).collect();
            let file = set_file_name(*tag);
            write_fields(&dir.join(&file), n, &fields)?;
            sets.push(PredictionSet {
                tag: *tag,
                count: fields.len(),
                file,
                rank_warnings,
            });
        }
        let pm = PredictionsManifest {
            method: method.clone(),
            config_hash: hash.clone(),
            grid_n: n,
            normalization: Normalization::default(),
            weights,
            sets,
        };
        write_file(&dir.join(PREDICTIONS_MANIFEST), pretty_json(&pm)?)?;
        seconds.insert(method.name().to_string(), start.elapsed().as_secs_f64());
    }
    write_file(&out.join(TIMINGS_FILE), pretty_json(&seconds)?)?;
    Ok(ReconstructSummary {
        predictions: out,
        config_hash: hash,
        methods: exp.config.baselines.iter().map(|m| m.name().to_string()).collect(),
        seconds,
    })
}

pub fn read_predictions_manifest(dir: &Path) -> Result<PredictionsManifest> {
    let path = dir.join(PREDICTIONS_MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(serde_json::from_str(&text)?)
}

/// Evaluates every configured baseline's predictions against the dataset and
/// writes the CSV and JSON reports.
pub fn evaluate(exp: &Experiment, dataset_dir: &Path, predictions_dir: &Path) -> Result<BenchmarkReport> {
    let start = Instant::now();
    let manifest = read_manifest(dataset_dir).context("reading dataset manifest")?;
    let hash = dataset_hash(dataset_dir)?;
    let n = manifest.system.domain.grid_n;
    let layout = rasterize(&manifest.system).context("rasterizing dataset system")?;
    let w_b = exp.config.metrics.boundary_width;
    let masks = build_masks(&layout, w_b).map_err(|e| HarnessError::Config(e.to_string()))?;
    let tests = load_test_sets(dataset_dir, &manifest)?;

    let mut rows = Vec::new();
    let mut per_sample = Vec::new();
    let mut error_maps = Vec::new();
    let mut rank_warnings = BTreeMap::new();
    for method in &exp.config.baselines {
        let dir = predictions_dir.join(method.name());
        let pm = read_predictions_manifest(&dir)?;
        if pm.config_hash != hash {
            return Err(HarnessError::ConfigHashMismatch {
                dataset: hash,
                what: format!("{} predictions", method.name()),
                found: pm.config_hash,
            });
        }
        if pm.grid_n != n {
            return Err(HarnessError::ShapeMismatch(format!(
                "{} predictions on a {} grid, dataset grid is {n}",
                method.name(),
                pm.grid_n
            )));
        }
        for (tag, samples) in &tests {
            let entry = pm.sets.iter().find(|s| s.tag == *tag).ok_or_else(|| {
                HarnessError::ShapeMismatch(format!("{} has no predictions for {tag}", method.name()))
            })?;
            let path = dir.join(&entry.file);
            let (header, records) = read_record_file(&path).context(path.display().to_string())?;
            if header != field_header(n) || records.len() != samples.len() {
                return Err(HarnessError::ShapeMismatch(format!(
                    "{}: {} records on a {} grid, expected {} on {n}",
                    path.display(),
                    records.len(),
                    header.grid_n,
                    samples.len()
                )));
            }
            let reports: Vec<MetricsReport> = records
                .par_iter()
                .zip(samples.par_iter())
                .map(|(r, s)| {
                    let pred = TemperatureField::new(n, r.field.clone())?;
                    evaluate_sample(&pred, &s.field, &masks)
                })
                .collect::<std::result::Result<_, _>>()
                .context(format!("evaluating {} on {tag}", method.name()))?;
            if exp.config.metrics.per_sample {
                for (i, (r, s)) in reports.iter().zip(samples).enumerate() {
                    per_sample.push(PerSampleRow::new(method.name(), *tag, i, s.seed, r));
                }
            }
            if exp.config.metrics.error_maps {
                let mut map = vec![0.0; n * n];
                for (r, s) in records.iter().zip(samples) {
                    for ((acc, p), t) in map.iter_mut().zip(&r.field).zip(s.field.values()) {
                        *acc += (p - t).abs();
                    }
                }
                map.iter_mut().for_each(|v| *v /= samples.len().max(1) as f64);
                error_maps.push((method.name(), *tag, map));
            }
            rank_warnings
                .entry(method.name().to_string())
                .or_insert_with(BTreeMap::new)
                .insert(*tag, entry.rank_warnings);
            if reports.is_empty() {
                continue;
            }
            let agg = aggregate(&reports).context("aggregating")?;
            rows.push(MetricsRow::new(method.name(), &exp.case_label, *tag, &agg, reports.len(), &hash));
        }
    }

    let reports_dir = exp.reports_dir();
    fs::create_dir_all(&reports_dir).map_err(io_err(&reports_dir))?;
    write_metrics_csv(&reports_dir.join("metrics.csv"), &rows)?;
    if exp.config.metrics.per_sample {
        crate::report::write_per_sample_csv(&reports_dir.join("per_sample.csv"), &per_sample, &hash)?;
    }
    for (method, tag, map) in &error_maps {
        let path = reports_dir
            .join("error_maps")
            .join(format!("{method}_{}.csv", tag.name().to_ascii_lowercase()));
        write_file(&path, crate::report::grid_csv(map, n))?;
    }

    let timings_path = predictions_dir.join(TIMINGS_FILE);
    let reconstruct_seconds: BTreeMap<String, f64> = fs::read_to_string(&timings_path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    let report = BenchmarkReport::new(
        exp,
        &manifest,
        &hash,
        rows,
        rank_warnings,
        reconstruct_seconds,
        start.elapsed().as_secs_f64(),
    );
    write_file(&reports_dir.join("report.json"), pretty_json(&report)?)?;
    Ok(report)
}
