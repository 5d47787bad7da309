//! Per-instance coordinate network: (x, y) → T, fitted to one observation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::mlp::{non_increasing_over_windows, Activation, Loss, Mlp, Optimizer, Trainer};
use super::{check_inputs, Normalization};
use crate::error::{Result, TfrError};
use crate::observation::{MonitorSet, Observation};

/// Window over which the training loss must not increase.
pub const LOSS_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpPointConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub seed: u64,
}

impl Default for MlpPointConfig {
    fn default() -> Self {
        Self {
            hidden: vec![100, 50],
            activation: Activation::Tanh,
            learning_rate: 0.1,
            epochs: 2000,
            warmup_epochs: 100,
            seed: 0,
        }
    }
}

impl MlpPointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(TfrError::Hyperparameter("hidden layer width must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TfrError::Hyperparameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(TfrError::Hyperparameter("epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MlpPointModel {
    net: Mlp,
    side_length: f64,
    normalization: Normalization,
    /// Full-batch MSE (normalized units) before each epoch's update.
    pub loss_curve: Vec<f64>,
    warmup_epochs: usize,
}

impl MlpPointModel {
    pub fn fit(obs: &Observation, monitors: &MonitorSet, cfg: &MlpPointConfig) -> Result<Self> {
        check_inputs(obs, monitors)?;
        cfg.validate()?;
        let normalization = Normalization::default();
        let side = monitors.side_length;
        let m = monitors.len();
        let x = DMatrix::from_fn(2, m, |i, j| {
            let mon = &monitors.monitors[j];
            let v = if i == 0 { mon.x } else { mon.y };
            2.0 * v / side - 1.0
        });
        let t = DMatrix::from_fn(1, m, |_, j| normalization.forward(obs.values()[j]));

        let mut sizes = vec![2];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let mut net = Mlp::new(&sizes, cfg.activation, cfg.seed);
        // Start from the ambient field instead of a random surface: data only
        // pins the function at the monitors.
        net.zero_output_layer();
        let mut trainer = Trainer::new(
            &net,
            Optimizer::GradientDescent {
                learning_rate: cfg.learning_rate,
            },
            Loss::Mse,
        );
        let mut loss_curve = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let loss = trainer.step(&mut net, &x, &t, 1.0);
            if !loss.is_finite() {
                return Err(TfrError::Divergence { epoch });
            }
            loss_curve.push(loss);
        }
        if net.layers.iter().any(|l| l.weights.iter().chain(l.bias.iter()).any(|w| !w.is_finite())) {
            return Err(TfrError::Divergence { epoch: cfg.epochs });
        }
        Ok(Self {
            net,
            side_length: side,
            normalization,
            loss_curve,
            warmup_epochs: cfg.warmup_epochs,
        })
    }

    /// Queries in meters.
    pub fn predict(&self, queries: &[[f64; 2]]) -> Vec<f64> {
        let x = DMatrix::from_fn(2, queries.len(), |i, j| 2.0 * queries[j][i] / self.side_length - 1.0);
        let out = self.net.forward(&x);
        out.iter().map(|&v| self.normalization.inverse(v)).collect()
    }

    pub fn loss_is_monotone(&self) -> bool {
        non_increasing_over_windows(&self.loss_curve, self.warmup_epochs, LOSS_WINDOW)
    }
}

pub fn fit_predict_mlp_point(
    obs: &Observation,
    monitors: &MonitorSet,
    queries: &[[f64; 2]],
    cfg: &MlpPointConfig,
) -> Result<Vec<f64>> {
    Ok(MlpPointModel::fit(obs, monitors, cfg)?.predict(queries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (MonitorSet, Observation) {
        let cells: Vec<(usize, usize)> = (0..16).map(|i| (i / 4 * 2 + 1, i % 4 * 2 + 1)).collect();
        let monitors = MonitorSet::from_cells(8, 0.1, &cells);
        let obs = Observation(monitors.monitors.iter().map(|m| 300.0 + 200.0 * m.x + 100.0 * m.y).collect());
        (monitors, obs)
    }

    #[test]
    fn loss_decreases_and_stays_monotone() {
        let (monitors, obs) = setup();
        let model = MlpPointModel::fit(&obs, &monitors, &MlpPointConfig::default()).unwrap();
        let curve = &model.loss_curve;
        assert!(curve.last().unwrap() <= &curve[0]);
        assert!(model.loss_is_monotone());
    }

    #[test]
    fn deterministic_given_seed() {
        let (monitors, obs) = setup();
        let cfg = MlpPointConfig {
            epochs: 50,
            ..Default::default()
        };
        let a = fit_predict_mlp_point(&obs, &monitors, &[[0.02, 0.03]], &cfg).unwrap();
        let b = fit_predict_mlp_point(&obs, &monitors, &[[0.02, 0.03]], &cfg).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn huge_step_diverges() {
        let (monitors, obs) = setup();
        let cfg = MlpPointConfig {
            learning_rate: 1e6,
            epochs: 200,
            activation: Activation::Relu,
            ..Default::default()
        };
        assert!(matches!(
            MlpPointModel::fit(&obs, &monitors, &cfg),
            Err(TfrError::Divergence { .. })
        ));
    }
}
