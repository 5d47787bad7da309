//! Reconstruction error metrics over the whole domain, the component
//! region and the boundary band.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TfrError};
use crate::field::TemperatureField;
use crate::layout::LayoutMatrix;

/// Boolean region masks, row-major like the fields they apply to.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    n: usize,
    component: Vec<bool>,
    boundary: Vec<bool>,
    boundary_width: usize,
}

impl RegionMasks {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn component(&self) -> &[bool] {
        &self.component
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    pub fn boundary_width(&self) -> usize {
        self.boundary_width
    }

    pub fn component_count(&self) -> usize {
        self.component.iter().filter(|&&c| c).count()
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.iter().filter(|&&c| c).count()
    }
}

/// Component region from the layout and a boundary band `w_b` cells wide.
pub fn build_masks(layout: &LayoutMatrix, w_b: usize) -> Result<RegionMasks> {
    let n = layout.n();
    if w_b < 1 || 2 * w_b >= n {
        return Err(TfrError::Dimension(format!(
            "boundary width {w_b} invalid for grid side {n} (need 1 <= w_b and 2 w_b < N)"
        )));
    }
    let component = layout.labels().iter().map(|&l| l > 0).collect();
    let mut boundary = vec![false; n * n];
    for row in 0..n {
        for col in 0..n {
            let edge_dist = row.min(col).min(n - 1 - row).min(n - 1 - col);
            boundary[row * n + col] = edge_dist < w_b;
        }
    }
    Ok(RegionMasks {
        n,
        component,
        boundary,
        boundary_width: w_b,
    })
}

/// The five errors of one prediction (K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub maxae: f64,
    pub cmae: f64,
    pub mcae: f64,
    pub bmae: f64,
}

impl MetricsReport {
    pub const COLUMNS: [&'static str; 5] = ["mae", "maxae", "cmae", "mcae", "bmae"];

    pub fn values(&self) -> [f64; 5] {
        [self.mae, self.maxae, self.cmae, self.mcae, self.bmae]
    }
}

pub fn evaluate(
    pred: &TemperatureField,
    truth: &TemperatureField,
    masks: &RegionMasks,
) -> Result<MetricsReport> {
    if pred.n() != truth.n() || pred.n() != masks.n {
        return Err(TfrError::Dimension(format!(
            "prediction side {}, truth side {}, masks side {}",
            pred.n(),
            truth.n(),
            masks.n
        )));
    }
    let (mut sum, mut max) = (0.0f64, 0.0f64);
    let (mut c_sum, mut c_max, mut c_count) = (0.0f64, 0.0f64, 0usize);
    let (mut b_sum, mut b_count) = (0.0f64, 0usize);
    for (i, (p, t)) in pred.values().iter().zip(truth.values()).enumerate() {
        let err = (p - t).abs();
        sum += err;
        max = max.max(err);
        if masks.component[i] {
            c_sum += err;
            c_max = c_max.max(err);
            c_count += 1;
        }
        if masks.boundary[i] {
            b_sum += err;
            b_count += 1;
        }
    }
    let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
    Ok(MetricsReport {
        mae: mean(sum, pred.values().len()),
        maxae: max,
        cmae: mean(c_sum, c_count),
        mcae: c_max,
        bmae: mean(b_sum, b_count),
    })
}

/// Field-wise mean over samples, maxima included.
pub fn aggregate(reports: &[MetricsReport]) -> Result<MetricsReport> {
    if reports.is_empty() {
        return Err(TfrError::EmptyList);
    }
    let k = reports.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    Ok(MetricsReport {
        mae: mean(|r| r.mae),
        maxae: mean(|r| r.maxae),
        cmae: mean(|r| r.cmae),
        mcae: mean(|r| r.mcae),
        bmae: mean(|r| r.bmae),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{rasterize, HeatSource, SourceShape, SystemSpec, DomainSpec, Edges, EdgeCondition};

    fn single_source_layout(n: usize) -> LayoutMatrix {
        let spec = SystemSpec {
            domain: DomainSpec {
                side_length: 1.0,
                grid_n: n,
                conductivity: 1.0,
            },
            sources: vec![HeatSource::uniform(SourceShape::Rectangle, [0.5, 0.5], 0.5, 0.5)],
            edges: Edges::uniform(EdgeCondition::DirichletConst { t0: 298.0 }),
            case_tag: None,
        };
        rasterize(&spec).unwrap()
    }

    #[test]
    fn perimeter_band_of_four_grid() {
        let masks = build_masks(&single_source_layout(4), 1).unwrap();
        assert_eq!(masks.boundary_count(), 12);
    }

    #[test]
    fn band_must_leave_an_interior() {
        let layout = single_source_layout(4);
        assert!(build_masks(&layout, 2).is_err());
        assert!(build_masks(&layout, 0).is_err());
    }

    #[test]
    fn zero_error_and_constant_offset() {
        let masks = build_masks(&single_source_layout(8), 1).unwrap();
        let truth = TemperatureField::from_fn(8, |i, j| 298.0 + (i * j) as f64);
        let r = evaluate(&truth, &truth, &masks).unwrap();
        assert_eq!(r.values(), [0.0; 5]);
        let shifted = TemperatureField::from_fn(8, |i, j| truth.get(i, j) + 1.0);
        let r = evaluate(&shifted, &truth, &masks).unwrap();
        for v in r.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_means_fieldwise() {
        let a = MetricsReport { mae: 1.0, maxae: 2.0, cmae: 1.0, mcae: 3.0, bmae: 0.5 };
        let b = MetricsReport { mae: 3.0, maxae: 6.0, cmae: 2.0, mcae: 5.0, bmae: 1.5 };
        assert_eq!(aggregate(&[a]).unwrap(), a);
        let m = aggregate(&[a, b]).unwrap();
        assert_eq!(m.mae, 2.0);
        assert_eq!(m.maxae, 4.0);
        assert!(matches!(aggregate(&[]), Err(TfrError::EmptyList)));
    }
}
