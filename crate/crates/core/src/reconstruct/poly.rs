//! Per-instance least-squares polynomial regression in (x, y).

use nalgebra::{DMatrix, DVector};

use super::check_inputs;
use crate::error::{Result, TfrError};
use crate::observation::{MonitorSet, Observation};

pub const DEFAULT_POLY_DEGREE: usize = 5;

/// Number of monomials `x^a y^b` with `a + b <= degree`.
pub fn monomial_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// The design matrix had fewer independent columns than monomials; the
/// minimum-norm solution was used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankWarning {
    pub rank: usize,
    pub columns: usize,
}

#[derive(Debug, Clone)]
pub struct PolyModel {
    degree: usize,
    side_length: f64,
    offset: f64,
    coefficients: DVector<f64>,
    pub rank_warning: Option<RankWarning>,
}

fn monomials(degree: usize, x: f64, y: f64, out: &mut Vec<f64>) {
    out.clear();
    for total in 0..=degree {
        for b in 0..=total {
            out.push(x.powi((total - b) as i32) * y.powi(b as i32));
        }
    }
}

impl PolyModel {
    /// Fits on monitor positions mapped to `[-1, 1]²` (an affine change of
    /// the normalized `[0, 1]²` coordinates, which spans the same polynomial
    /// space). Solved by SVD, minimum norm when rank deficient.
    pub fn fit(obs: &Observation, monitors: &MonitorSet, degree: usize) -> Result<Self> {
        check_inputs(obs, monitors)?;
        let m = monitors.len();
        let cols = monomial_count(degree);
        let side = monitors.side_length;
        let offset = obs.values().iter().sum::<f64>() / m as f64;
        let mut a = DMatrix::zeros(m, cols);
        let mut row = Vec::with_capacity(cols);
        for (i, mon) in monitors.monitors.iter().enumerate() {
            monomials(degree, 2.0 * mon.x / side - 1.0, 2.0 * mon.y / side - 1.0, &mut row);
            for (j, v) in row.iter().enumerate() {
                a[(i, j)] = *v;
            }
        }
        let b = DVector::from_iterator(m, obs.values().iter().map(|v| v - offset));
        let svd = a.svd(true, true);
        let sigma_max = svd.singular_values.max();
        let eps = f64::EPSILON * m.max(cols) as f64 * sigma_max;
        let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
        let coefficients = svd
            .solve(&b, eps)
            .map_err(|e| TfrError::Factorization(format!("polynomial least squares: {e}")))?;
        let rank_warning = (rank < cols).then_some(RankWarning { rank, columns: cols });
        Ok(Self {
            degree,
            side_length: side,
            offset,
            coefficients,
            rank_warning,
        })
    }

    pub fn coefficient_count(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict(&self, queries: &[[f64; 2]]) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.coefficients.len());
        queries
            .iter()
            .map(|q| {
                monomials(
                    self.degree,
                    2.0 * q[0] / self.side_length - 1.0,
                    2.0 * q[1] / self.side_length - 1.0,
                    &mut row,
                );
                self.offset + row.iter().zip(self.coefficients.iter()).map(|(a, c)| a * c).sum::<f64>()
            })
            .collect()
    }
}

/// Fits a degree-`degree` polynomial to the observation and evaluates it at
/// physical query points (m).
pub fn fit_predict_poly(
    obs: &Observation,
    monitors: &MonitorSet,
    queries: &[[f64; 2]],
    degree: usize,
) -> Result<(Vec<f64>, Option<RankWarning>)> {
    let model = PolyModel::fit(obs, monitors, degree)?;
    Ok((model.predict(queries), model.rank_warning))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_counts() {
        assert_eq!(monomial_count(0), 1);
        assert_eq!(monomial_count(1), 3);
        assert_eq!(monomial_count(5), 21);
    }

    #[test]
    fn reproduces_plane() {
        let cells = [
            (0, 0), (1, 5), (2, 9), (3, 3), (4, 7), (5, 1),
            (6, 6), (7, 2), (8, 8), (9, 4), (2, 2), (7, 9),
        ];
        let monitors = MonitorSet::from_cells(10, 0.1, &cells);
        let plane = |x: f64, y: f64| 298.0 + 2.0 * x + 3.0 * y;
        let obs = Observation(monitors.monitors.iter().map(|m| plane(m.x, m.y)).collect());
        let queries = [[0.013, 0.087], [0.05, 0.05], [0.099, 0.001]];
        for degree in 1..=3 {
            let (pred, warn) = fit_predict_poly(&obs, &monitors, &queries, degree).unwrap();
            assert!(warn.is_none());
            for (p, q) in pred.iter().zip(&queries) {
                assert!((p - plane(q[0], q[1])).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn constant_data() {
        let monitors = MonitorSet::from_cells(10, 0.1, &[(0, 0), (5, 5), (9, 2), (3, 8)]);
        let obs = Observation(vec![301.0; 4]);
        let (pred, _) = fit_predict_poly(&obs, &monitors, &[[0.02, 0.07]], 1).unwrap();
        assert!((pred[0] - 301.0).abs() < 1e-10);
    }

    #[test]
    fn underdetermined_warns() {
        let monitors = MonitorSet::from_cells(10, 0.1, &[(0, 0), (5, 5), (9, 2)]);
        let obs = Observation(vec![300.0, 301.0, 305.0]);
        let model = PolyModel::fit(&obs, &monitors, 2).unwrap();
        let warn = model.rank_warning.expect("rank warning");
        assert_eq!(warn.columns, 6);
        assert!(warn.rank <= 3);
        // Minimum-norm solution still interpolates the data.
        let pred = model.predict(&monitors.monitors.iter().map(|m| [m.x, m.y]).collect::<Vec<_>>());
        for (p, o) in pred.iter().zip(obs.values()) {
            assert!((p - o).abs() < 1e-8);
        }
    }
}
