//! Dataset generation and the on-disk container (`manifest.json` plus one
//! TFRS record file per sample set).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::container::{create_record_file, read_record_file, Record, RecordHeader};
use super::sampling::{sample_powers, sample_seed, SetTag};
use super::solver::{FieldSolver, SolverConfig};
use crate::error::{Result, TfrError};
use crate::field::TemperatureField;
use crate::layout::{SystemSpec, MAX_INTENSITY};
use crate::observation::{observe, MonitorSet, Observation};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FORMAT_VERSION: u32 = 1;
/// Samples solved per parallel batch while streaming to disk.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub q: Vec<f64>,
    pub field: TemperatureField,
    pub observation: Observation,
    pub seed: u64,
    pub tag: SetTag,
}

impl Sample {
    pub fn to_record(&self) -> Record {
        Record {
            intensities: self.q.clone(),
            monitor_temps: self.observation.0.clone(),
            field: self.field.values().to_vec(),
        }
    }
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone)]
pub struct DatasetPlan {
    pub spec: SystemSpec,
    pub monitors: MonitorSet,
    pub monitor_seed: u64,
    pub counts: BTreeMap<SetTag, usize>,
    pub base_seed: u64,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingInfo {
    pub distribution: String,
    pub min_intensity: f64,
    pub max_intensity: f64,
    pub zero_count_rounding: String,
    pub seed_derivation: String,
}

impl Default for SamplingInfo {
    fn default() -> Self {
        Self {
            distribution: "uniform".into(),
            min_intensity: 0.0,
            max_intensity: MAX_INTENSITY,
            zero_count_rounding: "half_up".into(),
            seed_derivation: "splitmix64(splitmix64(splitmix64(base_seed) ^ set_id) ^ index)".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEntry {
    pub tag: SetTag,
    pub count: usize,
    pub file: String,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub generator: String,
    pub system: SystemSpec,
    pub solver: SolverConfig,
    pub monitor_seed: u64,
    pub monitors: MonitorSet,
    pub base_seed: u64,
    pub sampling: SamplingInfo,
    pub sets: Vec<SetEntry>,
}

impl DatasetManifest {
    pub fn set(&self, tag: SetTag) -> Option<&SetEntry> {
        self.sets.iter().find(|s| s.tag == tag)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn record_header(&self) -> RecordHeader {
        RecordHeader {
            grid_n: self.system.domain.grid_n as u32,
            sources: self.system.sources.len() as u32,
            monitors: self.monitors.len() as u32,
        }
    }
}

pub fn set_file_name(tag: SetTag) -> String {
    format!("{}.tfrs", tag.name().to_ascii_lowercase())
}

impl DatasetPlan {
    fn validate(&self) -> Result<()> {
        let n = self.spec.domain.grid_n;
        if self.monitors.grid_n != n {
            return Err(TfrError::Dimension(format!(
                "monitors built for grid {} but system grid is {n}",
                self.monitors.grid_n
            )));
        }
        Ok(())
    }

    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            format_version: DATASET_FORMAT_VERSION,
            generator: format!("tfr-core {}", env!("CARGO_PKG_VERSION")),
            system: self.spec.clone(),
            solver: self.solver,
            monitor_seed: self.monitor_seed,
            monitors: self.monitors.clone(),
            base_seed: self.base_seed,
            sampling: SamplingInfo::default(),
            sets: self
                .counts
                .iter()
                .map(|(&tag, &count)| SetEntry {
                    tag,
                    count,
                    file: set_file_name(tag),
                    seeds: (0..count as u64)
                        .map(|k| sample_seed(self.base_seed, tag, k))
                        .collect(),
                })
                .collect(),
        }
    }
}

fn solve_batch(
    solver: &FieldSolver,
    monitors: &MonitorSet,
    tag: SetTag,
    base_seed: u64,
    indices: std::ops::Range<usize>,
) -> Result<Vec<Sample>> {
    let sources = solver.discretization().spec().sources.len();
    indices
        .into_par_iter()
        .map(|k| {
            let seed = sample_seed(base_seed, tag, k as u64);
            let q = sample_powers(sources, tag, seed);
            let field = solver.solve(&q).map_err(|e| TfrError::Sample {
                set: tag.name().into(),
                index: k,
                source: Box::new(e),
            })?;
            let observation = observe(&field, monitors)?;
            Ok(Sample {
                q,
                field,
                observation,
                seed,
                tag,
            })
        })
        .collect()
}

/// In-memory dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub sets: BTreeMap<SetTag, Vec<Sample>>,
}

/// Generates every configured set in memory. Results do not depend on the
/// size of the rayon pool.
pub fn generate_dataset(plan: &DatasetPlan) -> Result<Dataset> {
    plan.validate()?;
    let solver = FieldSolver::new(&plan.spec, plan.solver)?;
    let mut sets = BTreeMap::new();
    for (&tag, &count) in &plan.counts {
        sets.insert(
            tag,
            solve_batch(&solver, &plan.monitors, tag, plan.base_seed, 0..count)?,
        );
    }
    Ok(Dataset {
        manifest: plan.manifest(),
        sets,
    })
}

/// Generates the dataset straight to `dir`, one batch at a time.
pub fn write_dataset(plan: &DatasetPlan, dir: &Path) -> Result<DatasetManifest> {
    plan.validate()?;
    fs::create_dir_all(dir)?;
    let solver = FieldSolver::new(&plan.spec, plan.solver)?;
    let manifest = plan.manifest();
    let header = manifest.record_header();
    for entry in &manifest.sets {
        let mut writer = create_record_file(&dir.join(&entry.file), header)?;
        let mut start = 0;
        while start < entry.count {
            let end = (start + CHUNK).min(entry.count);
            for sample in solve_batch(&solver, &plan.monitors, entry.tag, plan.base_seed, start..end)? {
                writer.push(&sample.to_record())?;
            }
            start = end;
        }
        writer.finish()?;
    }
    fs::write(dir.join(MANIFEST_FILE), manifest.to_json()?)?;
    Ok(manifest)
}

impl Dataset {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let header = self.manifest.record_header();
        for entry in &self.manifest.sets {
            let mut writer = create_record_file(&dir.join(&entry.file), header)?;
            for sample in self.sets.get(&entry.tag).into_iter().flatten() {
                writer.push(&sample.to_record())?;
            }
            writer.finish()?;
        }
        fs::write(dir.join(MANIFEST_FILE), self.manifest.to_json()?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let manifest = read_manifest(dir)?;
        let mut sets = BTreeMap::new();
        for entry in &manifest.sets {
            let samples = read_set(dir, &manifest, entry.tag)?;
            sets.insert(entry.tag, samples);
        }
        Ok(Self { manifest, sets })
    }
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(TfrError::Format(format!(
            "unsupported dataset format version {}",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

/// Loads one set of a dataset directory and checks it against the manifest.
pub fn read_set(dir: &Path, manifest: &DatasetManifest, tag: SetTag) -> Result<Vec<Sample>> {
    let entry = manifest
        .set(tag)
        .ok_or_else(|| TfrError::Format(format!("dataset has no {tag} set")))?;
    let (header, records) = read_record_file(&dir.join(&entry.file))?;
    if header != manifest.record_header() {
        return Err(TfrError::Format(format!(
            "{}: header {header:?} disagrees with manifest",
            entry.file
        )));
    }
    if records.len() != entry.count {
        return Err(TfrError::Format(format!(
            "{}: {} records, manifest says {}",
            entry.file,
            records.len(),
            entry.count
        )));
    }
    let n = manifest.system.domain.grid_n;
    records
        .into_iter()
        .zip(&entry.seeds)
        .map(|(r, &seed)| {
            Ok(Sample {
                q: r.intensities,
                field: TemperatureField::new(n, r.field)?,
                observation: Observation(r.monitor_temps),
                seed,
                tag,
            })
        })
        .collect()
}
