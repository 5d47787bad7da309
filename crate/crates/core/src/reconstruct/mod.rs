//! Reconstruction baselines: the whole field from monitor readings.
//!
//! Per-instance methods (interpolators, polynomial regression, GPR, the point
//! network) fit one observation at a time. The vector network is trained on
//! a dataset first and then maps any observation to a field.

pub mod gpr;
pub mod interp;
pub mod mlp;
pub mod mlp_point;
pub mod mlp_vector;
pub mod poly;

use serde::{Deserialize, Serialize};

pub use gpr::{fit_predict_gpr, median_heuristic, GprModel, DEFAULT_GPR_LENGTH_SCALE, DEFAULT_JITTER};
pub use interp::{global_interpolate, knn_interpolate, DEFAULT_INTERP_LENGTH_SCALE, DEFAULT_NEIGHBORS};
pub use mlp::{Activation, Loss, Optimizer};
pub use mlp_point::{fit_predict_mlp_point, MlpPointConfig, MlpPointModel};
pub use mlp_vector::{MlpVectorConfig, MlpVectorModel};
pub use poly::{fit_predict_poly, monomial_count, PolyModel, RankWarning, DEFAULT_POLY_DEGREE};

use crate::error::{Result, TfrError};
use crate::field::TemperatureField;
use crate::layout::AMBIENT_TEMPERATURE;
use crate::observation::{MonitorSet, Observation};

/// Affine map applied to temperatures inside the networks:
/// `(T - shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub shift: f64,
    pub scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            shift: AMBIENT_TEMPERATURE,
            scale: 50.0,
        }
    }
}

impl Normalization {
    pub fn forward(&self, t: f64) -> f64 {
        (t - self.shift) / self.scale
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.scale + self.shift
    }
}

pub(crate) fn check_inputs(obs: &Observation, monitors: &MonitorSet) -> Result<()> {
    if monitors.is_empty() {
        return Err(TfrError::EmptyMonitors);
    }
    if obs.len() != monitors.len() {
        return Err(TfrError::Dimension(format!(
            "{} observed values for {} monitors",
            obs.len(),
            monitors.len()
        )));
    }
    if let Some(i) = obs.values().iter().position(|v| !v.is_finite()) {
        return Err(TfrError::Dimension(format!("observation {i} is not finite")));
    }
    Ok(())
}

/// Physical centers of all cells, row-major.
pub fn cell_center_queries(grid_n: usize, side_length: f64) -> Vec<[f64; 2]> {
    let h = side_length / grid_n as f64;
    (0..grid_n * grid_n)
        .map(|i| [((i % grid_n) as f64 + 0.5) * h, ((i / grid_n) as f64 + 0.5) * h])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
    pub length_scale: f64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_NEIGHBORS,
            length_scale: DEFAULT_INTERP_LENGTH_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalConfig {
    pub length_scale: f64,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            length_scale: DEFAULT_INTERP_LENGTH_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolyConfig {
    pub degree: usize,
}

impl Default for PolyConfig {
    fn default() -> Self {
        Self {
            degree: DEFAULT_POLY_DEGREE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GprConfig {
    pub length_scale: f64,
    /// Use the median pairwise monitor distance instead of `length_scale`.
    pub median_heuristic: bool,
    pub jitter: f64,
}

impl Default for GprConfig {
    fn default() -> Self {
        Self {
            length_scale: DEFAULT_GPR_LENGTH_SCALE,
            median_heuristic: false,
            jitter: DEFAULT_JITTER,
        }
    }
}

/// A baseline and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    KnnInterp(KnnConfig),
    GlobalInterp(GlobalConfig),
    Poly(PolyConfig),
    Gpr(GprConfig),
    MlpPoint(MlpPointConfig),
    MlpVector(MlpVectorConfig),
}

impl Method {
    pub const NAMES: [&'static str; 6] = ["knn_interp", "global_interp", "poly", "gpr", "mlp_point", "mlp_vector"];

    pub fn name(&self) -> &'static str {
        match self {
            Method::KnnInterp(_) => "knn_interp",
            Method::GlobalInterp(_) => "global_interp",
            Method::Poly(_) => "poly",
            Method::Gpr(_) => "gpr",
            Method::MlpPoint(_) => "mlp_point",
            Method::MlpVector(_) => "mlp_vector",
        }
    }

    /// Default hyperparameters for a method name.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "knn_interp" => Method::KnnInterp(KnnConfig::default()),
            "global_interp" => Method::GlobalInterp(GlobalConfig::default()),
            "poly" => Method::Poly(PolyConfig::default()),
            "gpr" => Method::Gpr(GprConfig::default()),
            "mlp_point" => Method::MlpPoint(MlpPointConfig::default()),
            "mlp_vector" => Method::MlpVector(MlpVectorConfig::default()),
            _ => return None,
        })
    }

    pub fn needs_training(&self) -> bool {
        matches!(self, Method::MlpVector(_))
    }

    /// Checks hyperparameters that do not depend on data, plus `k <= M`.
    pub fn validate(&self, monitor_count: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(TfrError::Hyperparameter(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Method::KnnInterp(c) => {
                positive("length_scale", c.length_scale)?;
                if c.k == 0 || c.k > monitor_count {
                    return Err(TfrError::Hyperparameter(format!(
                        "k = {} neighbours requested from {monitor_count} monitors",
                        c.k
                    )));
                }
                Ok(())
            }
            Method::GlobalInterp(c) => positive("length_scale", c.length_scale),
            Method::Poly(_) => Ok(()),
            Method::Gpr(c) => {
                positive("length_scale", c.length_scale)?;
                if c.jitter < 0.0 || !c.jitter.is_finite() {
                    return Err(TfrError::Hyperparameter(format!("jitter must be >= 0, got {}", c.jitter)));
                }
                Ok(())
            }
            Method::MlpPoint(c) => c.validate(),
            Method::MlpVector(c) => c.validate(),
        }
    }
}

/// A reconstructed field and any numerical warning raised on the way.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub field: TemperatureField,
    pub rank_warning: Option<RankWarning>,
}

/// A method ready to map observations to fields.
#[derive(Debug, Clone)]
pub enum Reconstructor {
    PerInstance(Method),
    Vector(MlpVectorModel),
}

impl Reconstructor {
    /// Wraps a per-instance method; the vector network must be trained via
    /// [`MlpVectorModel::train`] and wrapped in [`Reconstructor::Vector`].
    pub fn per_instance(method: Method) -> Result<Self> {
        if method.needs_training() {
            return Err(TfrError::Hyperparameter(
                "mlp_vector must be trained on a dataset before use".into(),
            ));
        }
        Ok(Reconstructor::PerInstance(method))
    }

    pub fn reconstruct(&self, obs: &Observation, monitors: &MonitorSet) -> Result<Reconstruction> {
        check_inputs(obs, monitors)?;
        let n = monitors.grid_n;
        let queries = cell_center_queries(n, monitors.side_length);
        let mut rank_warning = None;
        let values = match self {
            Reconstructor::Vector(model) => {
                if model.grid_n() != n {
                    return Err(TfrError::Dimension(format!(
                        "model grid {} but monitors on a {n} grid",
                        model.grid_n()
                    )));
                }
                let field = model.predict_field(obs)?;
                return Ok(Reconstruction { field, rank_warning });
            }
            Reconstructor::PerInstance(method) => match method {
                Method::KnnInterp(c) => knn_interpolate(obs, monitors, &queries, c.k, c.length_scale)?,
                Method::GlobalInterp(c) => global_interpolate(obs, monitors, &queries, c.length_scale)?,
                Method::Poly(c) => {
                    let (v, w) = fit_predict_poly(obs, monitors, &queries, c.degree)?;
                    rank_warning = w;
                    v
                }
                Method::Gpr(c) => {
                    let ell = if c.median_heuristic {
                        median_heuristic(monitors)
                    } else {
                        c.length_scale
                    };
                    fit_predict_gpr(obs, monitors, &queries, ell, c.jitter)?
                }
                Method::MlpPoint(c) => fit_predict_mlp_point(obs, monitors, &queries, c)?,
                Method::MlpVector(_) => {
                    return Err(TfrError::Hyperparameter(
                        "mlp_vector must be trained on a dataset before use".into(),
                    ))
                }
            },
        };
        Ok(Reconstruction {
            field: TemperatureField::new(n, values)?,
            rank_warning,
        })
    }
}

/// Reconstructs the full field with a per-instance method.
pub fn reconstruct_field(method: &Method, obs: &Observation, monitors: &MonitorSet) -> Result<TemperatureField> {
    Ok(Reconstructor::per_instance(method.clone())?.reconstruct(obs, monitors)?.field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_json_defaults() {
        let m: Method = serde_json::from_str(r#"{"kind":"knn_interp"}"#).unwrap();
        assert_eq!(m, Method::KnnInterp(KnnConfig::default()));
        let m: Method = serde_json::from_str(r#"{"kind":"gpr","length_scale":0.3}"#).unwrap();
        assert_eq!(
            m,
            Method::Gpr(GprConfig {
                length_scale: 0.3,
                ..Default::default()
            })
        );
        for name in Method::NAMES {
            let m = Method::from_name(name).unwrap();
            let back: Method = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
            assert_eq!(back, m);
            assert_eq!(m.name(), name);
        }
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let none = MonitorSet::from_cells(4, 0.1, &[]);
        assert!(matches!(
            reconstruct_field(&Method::from_name("poly").unwrap(), &Observation(vec![]), &none),
            Err(TfrError::EmptyMonitors)
        ));
        let two = MonitorSet::from_cells(4, 0.1, &[(0, 0), (3, 3)]);
        assert!(matches!(
            reconstruct_field(&Method::from_name("gpr").unwrap(), &Observation(vec![1.0]), &two),
            Err(TfrError::Dimension(_))
        ));
    }

    #[test]
    fn knn_k_above_m_is_config_error() {
        let m = Method::KnnInterp(KnnConfig { k: 5, ..Default::default() });
        assert!(matches!(m.validate(4), Err(TfrError::Hyperparameter(_))));
        assert!(m.validate(5).is_ok());
    }

    #[test]
    fn every_cell_predicted() {
        let monitors = MonitorSet::from_cells(8, 0.1, &[(0, 0), (7, 7), (3, 5), (6, 1)]);
        let obs = Observation(vec![300.0, 310.0, 305.0, 299.0]);
        for name in ["knn_interp", "global_interp", "gpr"] {
            let f = reconstruct_field(&Method::from_name(name).unwrap(), &obs, &monitors).unwrap();
            assert_eq!(f.values().len(), 64);
            assert!(f.values().iter().all(|v| (299.0..=310.0).contains(v)), "{name}");
        }
    }

    #[test]
    fn normalization_inverts() {
        let n = Normalization::default();
        assert_eq!(n.forward(298.0), 0.0);
        assert_eq!(n.inverse(n.forward(348.0)), 348.0);
    }
}
