//! Gaussian-weighted interpolation from the monitors: over the k nearest
//! (KInterpolation) or over all of them (GInterpolation).
//!
//! Distances are measured in domain-normalized coordinates and scaled by a
//! length scale, `w_i = exp(-d_i² / ℓ²)`, with the weights normalized over
//! the monitors that take part.

use std::cmp::Ordering;

use super::check_inputs;
use crate::error::{Result, TfrError};
use crate::observation::{MonitorSet, Observation};

pub const DEFAULT_NEIGHBORS: usize = 3;
/// Normalized-units length scale of the interpolation weights.
pub const DEFAULT_INTERP_LENGTH_SCALE: f64 = 0.1;

fn check_scale(length_scale: f64) -> Result<()> {
    if !(length_scale > 0.0) || !length_scale.is_finite() {
        return Err(TfrError::Hyperparameter(format!(
            "length scale must be positive, got {length_scale}"
        )));
    }
    Ok(())
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Weighted mean over the monitors in `members` (ascending index order).
/// Weights are shifted by the smallest squared distance before
/// exponentiation, which cancels in the normalization.
fn weighted_mean(values: &[f64], d2: &[f64], members: &[usize], inv_l2: f64) -> f64 {
    let d_min = members.iter().map(|&i| d2[i]).fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in members {
        let w = (-(d2[i] - d_min) * inv_l2).exp();
        num += w * values[i];
        den += w;
        lo = lo.min(values[i]);
        hi = hi.max(values[i]);
    }
    // The exact mean lies in [lo, hi]; clamping only removes rounding, so
    // constant data comes back exactly.
    (num / den).clamp(lo, hi)
}

/// KInterpolation at physical query points (m). Ties at the k-th distance
/// go to the lower monitor index.
pub fn knn_interpolate(
    obs: &Observation,
    monitors: &MonitorSet,
    queries: &[[f64; 2]],
    k: usize,
    length_scale: f64,
) -> Result<Vec<f64>> {
    check_inputs(obs, monitors)?;
    check_scale(length_scale)?;
    let m = monitors.len();
    if k == 0 || k > m {
        return Err(TfrError::Hyperparameter(format!(
            "k = {k} neighbours requested from {m} monitors"
        )));
    }
    let pos = monitors.normalized_positions();
    let inv_l2 = 1.0 / (length_scale * length_scale);
    let side = monitors.side_length;
    let mut d2 = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    Ok(queries
        .iter()
        .map(|q| {
            let qn = [q[0] / side, q[1] / side];
            for (d, p) in d2.iter_mut().zip(&pos) {
                *d = sq_dist(qn, *p);
            }
            order.iter_mut().enumerate().for_each(|(i, o)| *o = i);
            let by_dist = |a: &usize, b: &usize| -> Ordering {
                d2[*a].total_cmp(&d2[*b]).then(a.cmp(b))
            };
            if k < m {
                order.select_nth_unstable_by(k - 1, by_dist);
            }
            let members = &mut order[..k];
            members.sort_unstable();
            weighted_mean(obs.values(), &d2, members, inv_l2)
        })
        .collect())
}

/// GInterpolation at physical query points (m).
pub fn global_interpolate(
    obs: &Observation,
    monitors: &MonitorSet,
    queries: &[[f64; 2]],
    length_scale: f64,
) -> Result<Vec<f64>> {
    check_inputs(obs, monitors)?;
    check_scale(length_scale)?;
    let pos = monitors.normalized_positions();
    let inv_l2 = 1.0 / (length_scale * length_scale);
    let side = monitors.side_length;
    let all: Vec<usize> = (0..monitors.len()).collect();
    let mut d2 = vec![0.0; monitors.len()];
    Ok(queries
        .iter()
        .map(|q| {
            let qn = [q[0] / side, q[1] / side];
            for (d, p) in d2.iter_mut().zip(&pos) {
                *d = sq_dist(qn, *p);
            }
            weighted_mean(obs.values(), &d2, &all, inv_l2)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_monitors() -> (MonitorSet, Observation) {
        // Cells (0,0) and (0,1) on an 8-cell, 1 m grid: centers 0.125 m apart.
        (
            MonitorSet::from_cells(8, 1.0, &[(0, 0), (0, 1)]),
            Observation(vec![300.0, 302.0]),
        )
    }

    #[test]
    fn one_neighbour_copies_nearest() {
        let (m, o) = two_monitors();
        let p = knn_interpolate(&o, &m, &[[0.15, 0.06], [0.5, 0.5], [0.04, 0.9]], 1, 0.1).unwrap();
        assert_eq!(p, vec![302.0, 302.0, 300.0]);
    }

    #[test]
    fn symmetric_midpoint_is_average() {
        let (m, o) = two_monitors();
        let p = knn_interpolate(&o, &m, &[[0.125, 0.0625]], 2, 0.1).unwrap();
        assert!((p[0] - 301.0).abs() < 1e-12);
    }

    #[test]
    fn constant_data_gives_constant() {
        let m = MonitorSet::from_cells(10, 1.0, &[(0, 0), (3, 4), (9, 9), (5, 1)]);
        let o = Observation(vec![305.0; 4]);
        let q = [[0.2, 0.7], [0.95, 0.05]];
        for v in knn_interpolate(&o, &m, &q, 3, 0.1).unwrap() {
            assert!((v - 305.0).abs() < 1e-12);
        }
        for v in global_interpolate(&o, &m, &q, 0.1).unwrap() {
            assert!((v - 305.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_monitor_global_is_flat() {
        let m = MonitorSet::from_cells(10, 1.0, &[(4, 4)]);
        let o = Observation(vec![312.5]);
        let p = global_interpolate(&o, &m, &[[0.0, 0.0], [1.0, 1.0], [0.45, 0.45]], 0.1).unwrap();
        assert_eq!(p, vec![312.5; 3]);
    }

    #[test]
    fn global_matches_direct_formula() {
        let m = MonitorSet::from_cells(10, 0.1, &[(1, 1), (7, 2), (4, 8)]);
        let o = Observation(vec![300.0, 310.0, 320.0]);
        let q = [0.031, 0.062];
        let ell = 0.25;
        // Direct evaluation without the distance shift.
        let w: Vec<f64> = m
            .monitors
            .iter()
            .map(|mm| {
                let dx = (q[0] - mm.x) / 0.1;
                let dy = (q[1] - mm.y) / 0.1;
                (-(dx * dx + dy * dy) / (ell * ell)).exp()
            })
            .collect();
        let expected = w.iter().zip(o.values()).map(|(w, v)| w * v).sum::<f64>() / w.iter().sum::<f64>();
        let got = global_interpolate(&o, &m, &[q], ell).unwrap()[0];
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }

    #[test]
    fn tie_breaks_to_lower_index() {
        // Query equidistant from monitors 0 and 1; k = 1 picks monitor 0.
        let (m, o) = two_monitors();
        let p = knn_interpolate(&o, &m, &[[0.125, 0.0625]], 1, 0.1).unwrap();
        assert_eq!(p, vec![300.0]);
    }

    #[test]
    fn errors() {
        let (m, o) = two_monitors();
        assert!(matches!(knn_interpolate(&o, &m, &[[0.0, 0.0]], 3, 0.1), Err(TfrError::Hyperparameter(_))));
        assert!(knn_interpolate(&o, &m, &[[0.0, 0.0]], 1, 0.0).is_err());
        let empty = MonitorSet::from_cells(10, 1.0, &[]);
        assert!(matches!(
            global_interpolate(&Observation(vec![]), &empty, &[[0.0, 0.0]], 0.1),
            Err(TfrError::EmptyMonitors)
        ));
    }
}
