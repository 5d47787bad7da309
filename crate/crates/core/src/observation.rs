//! Monitoring points: placement, read-out, and the monitor-matrix and
//! tiled point-of-interest representations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TfrError};
use crate::field::TemperatureField;
use crate::layout::{LayoutMatrix, Side, SystemSpec, AMBIENT_TEMPERATURE};

/// Boundary monitors per edge.
pub const MONITORS_PER_EDGE: usize = 3;
/// Monitors placed on background cells between components.
pub const BETWEEN_MONITORS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum MonitorRole {
    OnBoundary { side: Side },
    /// 1-based source index.
    OnComponent { source: usize },
    BetweenComponents,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub row: usize,
    pub col: usize,
    #[serde(flatten)]
    pub role: MonitorRole,
    /// Cell-center coordinates (m).
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSet {
    pub grid_n: usize,
    pub side_length: f64,
    pub monitors: Vec<Monitor>,
}

impl MonitorSet {
    pub fn len(&self) -> usize {
        self.monitors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monitors.is_empty()
    }

    /// Builds a set from bare cell indices (role `BetweenComponents`).
    pub fn from_cells(grid_n: usize, side_length: f64, cells: &[(usize, usize)]) -> Self {
        let h = side_length / grid_n as f64;
        let monitors = cells
            .iter()
            .map(|&(row, col)| Monitor {
                row,
                col,
                role: MonitorRole::BetweenComponents,
                x: (col as f64 + 0.5) * h,
                y: (row as f64 + 0.5) * h,
            })
            .collect();
        Self {
            grid_n,
            side_length,
            monitors,
        }
    }

    /// Monitor positions in domain-normalized coordinates `[0, 1]²`.
    pub fn normalized_positions(&self) -> Vec<[f64; 2]> {
        self.monitors
            .iter()
            .map(|m| [m.x / self.side_length, m.y / self.side_length])
            .collect()
    }

    pub fn cell_indices(&self) -> Vec<usize> {
        self.monitors
            .iter()
            .map(|m| m.row * self.grid_n + m.col)
            .collect()
    }

    pub fn count_role(&self, pred: impl Fn(&MonitorRole) -> bool) -> usize {
        self.monitors.iter().filter(|m| pred(&m.role)).count()
    }
}

/// Temperatures read at the monitors, index-aligned with the [`MonitorSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Boundary-band width (cells) kept free of between-component monitors.
fn interior_margin(n: usize) -> usize {
    n.div_ceil(20).max(1)
}

/// Places boundary, on-component and between-component monitors.
///
/// Boundary monitors sit in the boundary cell row at 1/4, 1/2 and 3/4 of each
/// edge. Each component gets the covered cell nearest its center. The
/// between-component monitors come from greedy farthest-point sampling over
/// background cells away from the boundary band; ties in the max-min
/// distance are broken with the seeded generator.
pub fn place_monitors(spec: &SystemSpec, layout: &LayoutMatrix, rng_seed: u64) -> Result<MonitorSet> {
    let d = &spec.domain;
    let n = d.grid_n;
    if layout.n() != n || layout.source_count() != spec.sources.len() {
        return Err(TfrError::Dimension("layout does not match the system".into()));
    }
    let h = d.cell_size();
    let mut monitors: Vec<Monitor> = Vec::with_capacity(4 * MONITORS_PER_EDGE + spec.sources.len() + BETWEEN_MONITORS);
    let mut occupied = vec![false; n * n];
    let push = |row: usize,
                col: usize,
                role: MonitorRole,
                monitors: &mut Vec<Monitor>,
                occupied: &mut [bool]|
     -> Result<()> {
        if occupied[row * n + col] {
            return Err(TfrError::Placement(format!(
                "cell ({row}, {col}) would hold two monitors"
            )));
        }
        occupied[row * n + col] = true;
        let (x, y) = d.cell_center(row, col);
        monitors.push(Monitor { row, col, role, x, y });
        Ok(())
    };

    for side in Side::ALL {
        for q in 1..=MONITORS_PER_EDGE {
            let k = (n * q / (MONITORS_PER_EDGE + 1)).min(n - 1);
            let (row, col) = match side {
                Side::Bottom => (0, k),
                Side::Right => (k, n - 1),
                Side::Top => (n - 1, k),
                Side::Left => (k, 0),
            };
            push(row, col, MonitorRole::OnBoundary { side }, &mut monitors, &mut occupied)?;
        }
    }

    for (i, src) in spec.sources.iter().enumerate() {
        let label = i + 1;
        let mut best: Option<(f64, usize, usize)> = None;
        for row in 0..n {
            for col in 0..n {
                if layout.get(row, col) != label {
                    continue;
                }
                let (x, y) = d.cell_center(row, col);
                let dist = (x - src.center[0]).powi(2) + (y - src.center[1]).powi(2);
                // Near-ties (centers on cell corners) resolve to the lowest index.
                match best {
                    Some((b, _, _)) if dist >= b - 1e-9 * h * h => {}
                    _ => best = Some((dist, row, col)),
                }
            }
        }
        let (_, row, col) = best.ok_or_else(|| {
            TfrError::Placement(format!("source {label} covers no cell"))
        })?;
        push(row, col, MonitorRole::OnComponent { source: label }, &mut monitors, &mut occupied)?;
    }

    let margin = interior_margin(n);
    let candidates: Vec<usize> = (margin..n - margin)
        .flat_map(|row| (margin..n - margin).map(move |col| row * n + col))
        .filter(|&c| layout.labels()[c] == 0 && !occupied[c])
        .collect();
    if candidates.len() < BETWEEN_MONITORS {
        return Err(TfrError::Placement(format!(
            "only {} free background cells for {BETWEEN_MONITORS} monitors",
            candidates.len()
        )));
    }
    // Squared distances in cell units are exact integers.
    let sq = |a: usize, b: usize| -> u64 {
        let (ra, ca) = ((a / n) as i64, (a % n) as i64);
        let (rb, cb) = ((b / n) as i64, (b % n) as i64);
        ((ra - rb).pow(2) + (ca - cb).pow(2)) as u64
    };
    let mut min_dist: Vec<u64> = candidates
        .iter()
        .map(|&c| {
            monitors
                .iter()
                .map(|m| sq(c, m.row * n + m.col))
                .min()
                .unwrap_or(u64::MAX)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..BETWEEN_MONITORS {
        let best = *min_dist.iter().max().unwrap();
        let ties: Vec<usize> = (0..candidates.len()).filter(|&i| min_dist[i] == best).collect();
        let pick = candidates[ties[rng.random_range(0..ties.len())]];
        push(pick / n, pick % n, MonitorRole::BetweenComponents, &mut monitors, &mut occupied)?;
        for (i, &c) in candidates.iter().enumerate() {
            min_dist[i] = min_dist[i].min(sq(c, pick));
        }
    }

    Ok(MonitorSet {
        grid_n: n,
        side_length: d.side_length,
        monitors,
    })
}

/// Optional additive Gaussian sensor noise (off unless requested).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoise {
    /// Standard deviation (K).
    pub std_dev: f64,
    pub seed: u64,
}

/// Exact read-out of `field` at the monitor cells.
pub fn observe(field: &TemperatureField, monitors: &MonitorSet) -> Result<Observation> {
    if field.n() != monitors.grid_n {
        return Err(TfrError::Dimension(format!(
            "field side {} vs monitor grid {}",
            field.n(),
            monitors.grid_n
        )));
    }
    Ok(Observation(
        monitors.monitors.iter().map(|m| field.get(m.row, m.col)).collect(),
    ))
}

/// Read-out with optional additive noise.
pub fn observe_noisy(
    field: &TemperatureField,
    monitors: &MonitorSet,
    noise: Option<&SensorNoise>,
) -> Result<Observation> {
    let mut obs = observe(field, monitors)?;
    if let Some(noise) = noise {
        let normal = Normal::new(0.0, noise.std_dev)
            .map_err(|e| TfrError::Hyperparameter(format!("sensor noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        for v in &mut obs.0 {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(obs)
}

/// Default background value of a monitor matrix (K).
pub const DEFAULT_FILL: f64 = AMBIENT_TEMPERATURE;

/// Full-grid image with observed values at monitor cells and `fill` elsewhere.
pub fn to_monitor_matrix(
    obs: &Observation,
    monitors: &MonitorSet,
    n: usize,
    fill: f64,
) -> Result<TemperatureField> {
    if obs.len() != monitors.len() {
        return Err(TfrError::Dimension(format!(
            "{} observations for {} monitors",
            obs.len(),
            monitors.len()
        )));
    }
    let mut m = TemperatureField::constant(n, fill);
    for (mon, &v) in monitors.monitors.iter().zip(obs.values()) {
        if mon.row >= n || mon.col >= n {
            return Err(TfrError::Dimension(format!(
                "monitor ({}, {}) outside a {n}x{n} grid",
                mon.row, mon.col
            )));
        }
        m.set(mon.row, mon.col, v);
    }
    Ok(m)
}

/// Partition of the N×N grid into `tile`×`tile` blocks of flat cell indices,
/// blocks in row-major order, cells row-major inside each block.
pub fn tile_pois(n: usize, tile: usize) -> Result<Vec<Vec<usize>>> {
    if tile == 0 || n % tile != 0 {
        return Err(TfrError::Dimension(format!(
            "tile size {tile} does not divide grid side {n}"
        )));
    }
    let per_side = n / tile;
    let mut blocks = Vec::with_capacity(per_side * per_side);
    for br in 0..per_side {
        for bc in 0..per_side {
            let mut cells = Vec::with_capacity(tile * tile);
            for r in 0..tile {
                for c in 0..tile {
                    cells.push((br * tile + r) * n + bc * tile + c);
                }
            }
            blocks.push(cells);
        }
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monitor_matrix_single_cell() {
        let monitors = MonitorSet::from_cells(4, 0.1, &[(1, 1)]);
        let m = to_monitor_matrix(&Observation(vec![300.0]), &monitors, 4, 298.0).unwrap();
        assert_eq!(m.values().iter().filter(|&&v| v == 300.0).count(), 1);
        assert_eq!(m.values().iter().filter(|&&v| v == 298.0).count(), 15);
        assert_eq!(m.get(1, 1), 300.0);
    }

    #[test]
    fn monitor_matrix_empty_is_all_fill() {
        let monitors = MonitorSet::from_cells(5, 0.1, &[]);
        let m = to_monitor_matrix(&Observation(vec![]), &monitors, 5, 290.0).unwrap();
        assert!(m.values().iter().all(|&v| v == 290.0));
    }

    #[test]
    fn monitor_matrix_round_trip() {
        let monitors = MonitorSet::from_cells(6, 0.1, &[(0, 0), (2, 3), (5, 5)]);
        let obs = Observation(vec![301.0, 305.5, 299.25]);
        let m = to_monitor_matrix(&obs, &monitors, 6, 298.0).unwrap();
        assert_eq!(observe(&m, &monitors).unwrap(), obs);
    }

    #[test]
    fn tiles_partition_grid() {
        let blocks = tile_pois(200, 50).unwrap();
        assert_eq!(blocks.len(), 16);
        assert!(blocks.iter().all(|b| b.len() == 2500));
        let mut seen = vec![false; 200 * 200];
        for b in &blocks {
            for &c in b {
                assert!(!seen[c]);
                seen[c] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));

        let whole = tile_pois(4, 4).unwrap();
        assert_eq!(whole, vec![(0..16).collect::<Vec<_>>()]);
        assert!(matches!(tile_pois(10, 4), Err(TfrError::Dimension(_))));
    }

    #[test]
    fn observe_indexed_lookup() {
        let field = TemperatureField::from_fn(8, |i, j| (i + j) as f64);
        let monitors = MonitorSet::from_cells(8, 0.1, &[(0, 7), (3, 4), (6, 1), (7, 7)]);
        let obs = observe(&field, &monitors).unwrap();
        for (m, v) in monitors.monitors.iter().zip(obs.values()) {
            assert_eq!(*v, (m.row + m.col) as f64);
        }
        let flat = TemperatureField::constant(8, 298.0);
        assert!(observe(&flat, &monitors).unwrap().values().iter().all(|&v| v == 298.0));
    }

    #[test]
    fn noise_hook_is_seeded() {
        let field = TemperatureField::constant(8, 298.0);
        let monitors = MonitorSet::from_cells(8, 0.1, &[(1, 1), (2, 2)]);
        let noise = SensorNoise { std_dev: 0.5, seed: 9 };
        let a = observe_noisy(&field, &monitors, Some(&noise)).unwrap();
        let b = observe_noisy(&field, &monitors, Some(&noise)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values()[0], 298.0);
        assert_eq!(observe_noisy(&field, &monitors, None).unwrap().values(), &[298.0, 298.0]);
    }
}
