//! Per-instance Gaussian process regression (simple Kriging) with an RBF
//! kernel on centered data.

use nalgebra::{DMatrix, DVector};

use super::check_inputs;
use crate::error::{Result, TfrError};
use crate::observation::{MonitorSet, Observation};

/// Normalized-units kernel length scale.
pub const DEFAULT_GPR_LENGTH_SCALE: f64 = 0.2;
pub const DEFAULT_JITTER: f64 = 1e-8;
/// Times the jitter is multiplied by ten after a failed factorization.
pub const JITTER_ESCALATIONS: usize = 3;

#[inline]
fn rbf(a: [f64; 2], b: [f64; 2], inv_two_l2: f64) -> f64 {
    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    (-d2 * inv_two_l2).exp()
}

#[derive(Debug, Clone)]
pub struct GprModel {
    positions: Vec<[f64; 2]>,
    side_length: f64,
    inv_two_l2: f64,
    mean: f64,
    alpha: DVector<f64>,
    /// Jitter that was finally used.
    pub jitter: f64,
}

impl GprModel {
    pub fn fit(obs: &Observation, monitors: &MonitorSet, length_scale: f64, jitter: f64) -> Result<Self> {
        check_inputs(obs, monitors)?;
        if !(length_scale > 0.0) || !(jitter >= 0.0) {
            return Err(TfrError::Hyperparameter(format!(
                "gpr needs length_scale > 0 and jitter >= 0 (got {length_scale}, {jitter})"
            )));
        }
        let positions = monitors.normalized_positions();
        let m = positions.len();
        let inv_two_l2 = 0.5 / (length_scale * length_scale);
        let kernel = DMatrix::from_fn(m, m, |i, j| rbf(positions[i], positions[j], inv_two_l2));
        let mean = obs.values().iter().sum::<f64>() / m as f64;
        let y = DVector::from_iterator(m, obs.values().iter().map(|v| v - mean));

        let mut current = jitter;
        for attempt in 0..=JITTER_ESCALATIONS {
            let mut k = kernel.clone();
            for i in 0..m {
                k[(i, i)] += current;
            }
            if let Some(chol) = k.cholesky() {
                return Ok(Self {
                    positions,
                    side_length: monitors.side_length,
                    inv_two_l2,
                    mean,
                    alpha: chol.solve(&y),
                    jitter: current,
                });
            }
            if attempt < JITTER_ESCALATIONS {
                current = if current > 0.0 { current * 10.0 } else { 1e-12 };
            }
        }
        Err(TfrError::Factorization(format!(
            "kernel matrix not positive definite with jitter up to {current:e}"
        )))
    }

    pub fn predict(&self, queries: &[[f64; 2]]) -> Vec<f64> {
        queries
            .iter()
            .map(|q| {
                let qn = [q[0] / self.side_length, q[1] / self.side_length];
                self.mean
                    + self
                        .positions
                        .iter()
                        .zip(self.alpha.iter())
                        .map(|(p, a)| a * rbf(qn, *p, self.inv_two_l2))
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Posterior mean at physical query points (m).
pub fn fit_predict_gpr(
    obs: &Observation,
    monitors: &MonitorSet,
    queries: &[[f64; 2]],
    length_scale: f64,
    jitter: f64,
) -> Result<Vec<f64>> {
    Ok(GprModel::fit(obs, monitors, length_scale, jitter)?.predict(queries))
}

/// Median pairwise monitor distance in normalized units, an alternative
/// length-scale choice.
pub fn median_heuristic(monitors: &MonitorSet) -> f64 {
    let p = monitors.normalized_positions();
    let mut d: Vec<f64> = Vec::new();
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            d.push(((p[i][0] - p[j][0]).powi(2) + (p[i][1] - p[j][1]).powi(2)).sqrt());
        }
    }
    if d.is_empty() {
        return DEFAULT_GPR_LENGTH_SCALE;
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}
