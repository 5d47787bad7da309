//! Cell-centered scalar fields on the square computational grid.
//!
//! Storage is row-major with row 0 along the bottom edge, so the value of
//! cell `(row, col)` sits at `row * n + col` and its center is at
//! `((col + 0.5) h, (row + 0.5) h)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TfrError};

/// Temperatures in Kelvin at the N×N cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureField {
    n: usize,
    values: Vec<f64>,
}

impl TemperatureField {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(TfrError::Dimension(format!(
                "field of side {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            n,
            values: vec![value; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                values.push(f(row, col));
            }
        }
        Self { n, values }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.n + col] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute cell-wise difference.
    pub fn max_abs_diff(&self, other: &TemperatureField) -> f64 {
        assert_eq!(self.n, other.n, "field sizes differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
