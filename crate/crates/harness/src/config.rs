//! Experiment configuration (JSON) and its resolution into a system.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tfr_core::generator::{DatasetPlan, SetTag, SolverConfig};
use tfr_core::layout::{builtin_layout_with, rasterize, CaseOptions, CaseTag, LayoutMatrix, SystemSpec};
use tfr_core::observation::{place_monitors, MonitorSet};
use tfr_core::reconstruct::Method;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    pub boundary_width: usize,
    /// Also write one CSV row per evaluated sample.
    pub per_sample: bool,
    /// Also write the mean absolute error map of every (method, set).
    pub error_maps: bool,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self {
            boundary_width: 1,
            per_sample: false,
            error_maps: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// `HSink`, `ADlet`, `DSine`, or a path (relative to the config file) to
    /// a system JSON.
    pub case: String,
    #[serde(default)]
    pub case_options: CaseOptions,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Base seed of the intensity sampling.
    #[serde(default)]
    pub seed: u64,
    /// Seed of the between-component monitor placement; defaults to `seed`.
    #[serde(default)]
    pub monitor_seed: Option<u64>,
    pub counts: BTreeMap<SetTag, usize>,
    #[serde(default)]
    pub baselines: Vec<Method>,
    #[serde(default)]
    pub metrics: MetricSettings,
    /// Output root (relative to the working directory); defaults to
    /// `runs/<name>`.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// A loaded configuration with its system resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spec: SystemSpec,
    pub case_label: String,
    pub out_dir: PathBuf,
}

fn config_err(path: &Path, message: impl Into<String>) -> HarnessError {
    HarnessError::ConfigFile {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl Experiment {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(path, e.to_string()))?;
        let mut config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| config_err(path, e.to_string()))?;
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(out) = &overrides.out_dir {
            config.out_dir = Some(out.clone());
        }
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_config(config, base).map_err(|e| match e {
            HarnessError::Config(message) => config_err(path, message),
            other => other,
        })
    }

    /// `base` resolves a relative custom-case path.
    pub fn from_config(config: ExperimentConfig, base: &Path) -> Result<Self> {
        let (spec, case_label) = match config.case.parse::<CaseTag>() {
            Ok(CaseTag::Custom) | Err(_) => {
                let p = base.join(&config.case);
                if !p.is_file() {
                    return Err(HarnessError::Config(format!(
                        "unknown case `{}` (expected HSink, ADlet, DSine or a system JSON file)",
                        config.case
                    )));
                }
                let text = fs::read_to_string(&p).map_err(|e| HarnessError::Config(e.to_string()))?;
                let spec = SystemSpec::from_json(&text)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
                let label = spec.case_tag.unwrap_or(CaseTag::Custom).to_string();
                (spec, label)
            }
            Ok(tag) => {
                let spec = builtin_layout_with(tag, &config.case_options)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                (spec, tag.to_string())
            }
        };
        spec.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if config.counts.values().all(|&c| c == 0) {
            return Err(HarnessError::Config("counts: no samples requested".into()));
        }
        let mut seen = BTreeSet::new();
        for m in &config.baselines {
            if !seen.insert(m.name()) {
                return Err(HarnessError::Config(format!("baseline `{}` listed twice", m.name())));
            }
        }
        let n = spec.domain.grid_n;
        let w = config.metrics.boundary_width;
        if w == 0 || 2 * w >= n {
            return Err(HarnessError::Config(format!(
                "metrics.boundary_width = {w} needs 1 <= w and 2w < {n}"
            )));
        }
        let out_dir = config
            .out_dir
            .clone()
            .unwrap_or_else(|| Path::new("runs").join(&config.name));
        Ok(Self {
            config,
            spec,
            case_label,
            out_dir,
        })
    }

    pub fn monitor_seed(&self) -> u64 {
        self.config.monitor_seed.unwrap_or(self.config.seed)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.out_dir.join("dataset")
    }

    pub fn predictions_dir(&self) -> PathBuf {
        self.out_dir.join("predictions")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out_dir.join("reports")
    }

    pub fn layout(&self) -> Result<LayoutMatrix> {
        rasterize(&self.spec).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn monitors(&self, layout: &LayoutMatrix) -> Result<MonitorSet> {
        place_monitors(&self.spec, layout, self.monitor_seed()).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Checks every baseline against the monitor count; runs before any solve.
    pub fn validate_baselines(&self, monitor_count: usize) -> Result<()> {
        for m in &self.config.baselines {
            m.validate(monitor_count)
                .map_err(|e| HarnessError::Config(format!("baseline `{}`: {e}", m.name())))?;
        }
        Ok(())
    }

    pub fn plan(&self) -> Result<DatasetPlan> {
        let layout = self.layout()?;
        let monitors = self.monitors(&layout)?;
        self.validate_baselines(monitors.len())?;
        Ok(DatasetPlan {
            spec: self.spec.clone(),
            monitors,
            monitor_seed: self.monitor_seed(),
            counts: self.config.counts.clone(),
            base_seed: self.config.seed,
            solver: self.config.solver,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        serde_json::from_str(
            r#"{"name":"t","case":"HSink","case_options":{"grid_n":32},
                "counts":{"Test0":2},"baselines":[{"kind":"knn_interp"}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn builtin_case_resolves() {
        let e = Experiment::from_config(base(), Path::new(".")).unwrap();
        assert_eq!(e.case_label, "HSink");
        assert_eq!(e.spec.domain.grid_n, 32);
        assert_eq!(e.out_dir, Path::new("runs/t"));
    }

    #[test]
    fn unknown_case_is_config_error() {
        let mut c = base();
        c.case = "Nope".into();
        let err = Experiment::from_config(c, Path::new(".")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn duplicate_baseline_rejected() {
        let mut c = base();
        c.baselines.push(c.baselines[0].clone());
        assert!(matches!(
            Experiment::from_config(c, Path::new(".")),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn unknown_field_rejected() {
        let r: std::result::Result<ExperimentConfig, _> =
            serde_json::from_str(r#"{"name":"t","case":"HSink","counts":{},"bogus":1}"#);
        assert!(r.is_err());
    }
}
