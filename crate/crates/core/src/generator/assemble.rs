//! Cell-centered finite-volume discretization of `-div(λ grad T) = φ`.
//!
//! Each cell balances the conductive fluxes through its four faces against
//! the heat generated inside it. Interior faces couple neighbours with
//! coefficient `λ` (face length `h` over center distance `h`). Boundary faces
//! are eliminated: a Dirichlet face pins the face value at distance `h/2`
//! (coefficient `2λ`); a Robin face puts the half-cell conduction in series
//! with the convective film; an adiabatic face contributes nothing.

use crate::error::{Result, TfrError};
use crate::layout::{power_field_on, rasterize, FaceCondition, LayoutMatrix, Side, SystemSpec};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }
}

/// A boundary face eliminated into the cell it bounds. The heat leaving the
/// domain through it is `coefficient * (T_cell - reference)` (W/m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub side: Side,
    pub coefficient: f64,
    pub reference: f64,
}

/// Assembled system `A T = b` for one intensity vector.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Grid operator of a system, independent of the intensities.
#[derive(Debug, Clone)]
pub struct Discretization {
    spec: SystemSpec,
    layout: LayoutMatrix,
    matrix: CsrMatrix,
    boundary_rhs: Vec<f64>,
    faces: Vec<BoundaryFace>,
    reference_temperature: f64,
}

impl Discretization {
    pub fn new(spec: &SystemSpec) -> Result<Self> {
        let layout = rasterize(spec)?;
        let d = &spec.domain;
        let n = d.grid_n;
        let h = d.cell_size();
        let lambda = d.conductivity;

        let mut faces = Vec::with_capacity(4 * n);
        for side in Side::ALL {
            let edge = spec.edges.get(side);
            for k in 0..n {
                let s = (k as f64 + 0.5) * h;
                let cell = match side {
                    Side::Bottom => k,
                    Side::Top => (n - 1) * n + k,
                    Side::Left => k * n,
                    Side::Right => k * n + n - 1,
                };
                let (coefficient, reference) = match edge.at(s, d.side_length) {
                    FaceCondition::Adiabatic => continue,
                    FaceCondition::Dirichlet(t) => (2.0 * lambda, t),
                    FaceCondition::Robin { h: film, t0 } => {
                        // Per unit face length: 1 / (1/film + (h/2)/λ), times face length h.
                        (h / (1.0 / film + 0.5 * h / lambda), t0)
                    }
                };
                faces.push(BoundaryFace {
                    cell,
                    side,
                    coefficient,
                    reference,
                });
            }
        }
        if faces.is_empty() {
            return Err(TfrError::SingularSystem);
        }

        let mut boundary_diag = vec![0.0; n * n];
        let mut boundary_rhs = vec![0.0; n * n];
        for f in &faces {
            boundary_diag[f.cell] += f.coefficient;
            boundary_rhs[f.cell] += f.coefficient * f.reference;
        }

        let mut row_ptr = Vec::with_capacity(n * n + 1);
        let mut col_idx = Vec::with_capacity(5 * n * n);
        let mut values = Vec::with_capacity(5 * n * n);
        row_ptr.push(0);
        for row in 0..n {
            for col in 0..n {
                let i = row * n + col;
                let mut diag = boundary_diag[i];
                let mut push_neighbor = |j: usize, cols: &mut Vec<usize>, vals: &mut Vec<f64>| {
                    cols.push(j);
                    vals.push(-lambda);
                    diag += lambda;
                };
                // Columns in ascending order: south, west, self, east, north.
                if row > 0 {
                    push_neighbor(i - n, &mut col_idx, &mut values);
                }
                if col > 0 {
                    push_neighbor(i - 1, &mut col_idx, &mut values);
                }
                let diag_pos = values.len();
                col_idx.push(i);
                values.push(0.0);
                if col + 1 < n {
                    push_neighbor(i + 1, &mut col_idx, &mut values);
                }
                if row + 1 < n {
                    push_neighbor(i + n, &mut col_idx, &mut values);
                }
                values[diag_pos] = diag;
                row_ptr.push(values.len());
            }
        }

        let total: f64 = faces.iter().map(|f| f.coefficient).sum();
        let reference_temperature =
            faces.iter().map(|f| f.coefficient * f.reference).sum::<f64>() / total;

        Ok(Self {
            spec: spec.clone(),
            layout,
            matrix: CsrMatrix {
                n: n * n,
                row_ptr,
                col_idx,
                values,
            },
            boundary_rhs,
            faces,
            reference_temperature,
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn layout(&self) -> &LayoutMatrix {
        &self.layout
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.faces
    }

    /// Coefficient-weighted mean of the boundary reference temperatures.
    pub fn reference_temperature(&self) -> f64 {
        self.reference_temperature
    }

    /// Right-hand side for a cell-center power density `phi` (W/m^2).
    pub fn rhs_from_power(&self, phi: &[f64]) -> Vec<f64> {
        let h = self.spec.domain.cell_size();
        let area = h * h;
        self.boundary_rhs
            .iter()
            .zip(phi)
            .map(|(b, p)| b + p * area)
            .collect()
    }

    pub fn power(&self, q: &[f64], check_range: bool) -> Result<Vec<f64>> {
        power_field_on(&self.spec, &self.layout, q, check_range)
    }

    pub fn system(&self, q: &[f64]) -> Result<LinearSystem> {
        let phi = self.power(q, true)?;
        Ok(LinearSystem {
            matrix: self.matrix.clone(),
            rhs: self.rhs_from_power(&phi),
        })
    }

    /// Net heat leaving through the boundary for a solved field (W/m).
    pub fn boundary_outflow(&self, field: &[f64]) -> f64 {
        self.faces
            .iter()
            .map(|f| f.coefficient * (field[f.cell] - f.reference))
            .sum()
    }

    /// Total generated heat `Σ φ h²` (W/m).
    pub fn generated_heat(&self, phi: &[f64]) -> f64 {
        let h = self.spec.domain.cell_size();
        phi.iter().sum::<f64>() * h * h
    }
}

/// Sparse system for `spec` driven by intensities `q`.
pub fn assemble(spec: &SystemSpec, q: &[f64]) -> Result<LinearSystem> {
    Discretization::new(spec)?.system(q)
}
