//! Linear solvers for the assembled conduction system.

use serde::{Deserialize, Serialize};

use super::assemble::{CsrMatrix, Discretization};
use crate::error::{Result, TfrError};
use crate::field::TemperatureField;
use crate::layout::SystemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Jacobi-preconditioned conjugate gradient.
    ConjugateGradient,
    /// Banded Cholesky factorization, reused across right-hand sides.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub rel_tol: f64,
    /// Iteration cap for CG; `None` means `20 N²`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::ConjugateGradient,
            rel_tol: 1e-10,
            max_iter: None,
        }
    }
}

impl SolverConfig {
    pub fn direct() -> Self {
        Self {
            method: SolverMethod::Direct,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(TfrError::InvalidSpec("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned CG on `A x = b`, starting from `x`.
///
/// Stops once `‖r‖ <= rel_tol * max(‖r0‖, 1e-4 ‖b‖)` (and never later than
/// `‖r‖ <= rel_tol ‖b‖` would allow), so a good starting guess tightens the
/// absolute accuracy rather than loosening it.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgStats> {
    let n = a.dim();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut r = vec![0.0; n];
    a.mul_vec_into(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let r0_norm = norm(&r);
    let target = rel_tol * r0_norm.max(1e-4 * b_norm).min(b_norm);
    if r0_norm <= target {
        return Ok(CgStats {
            iterations: 0,
            relative_residual: r0_norm / b_norm,
        });
    }

    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut restarts = 0usize;
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= target {
            // Confirm on the true residual; recurrence drift can fake convergence.
            a.mul_vec_into(x, &mut ap);
            let true_norm = b
                .iter()
                .zip(&ap)
                .map(|(b, ax)| (b - ax) * (b - ax))
                .sum::<f64>()
                .sqrt();
            // After two restarts the roundoff floor is reached; settle for
            // the contract tolerance.
            if true_norm <= target || (restarts >= 2 && true_norm <= rel_tol * b_norm) {
                return Ok(CgStats {
                    iterations: it,
                    relative_residual: true_norm / b_norm,
                });
            }
            restarts += 1;
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // Out of iterations: still fine if the contract tolerance is met.
    a.mul_vec_into(x, &mut ap);
    let true_norm = norm(&b.iter().zip(&ap).map(|(b, ax)| b - ax).collect::<Vec<_>>());
    if true_norm <= rel_tol * b_norm {
        return Ok(CgStats {
            iterations: max_iter,
            relative_residual: true_norm / b_norm,
        });
    }
    Err(TfrError::Convergence {
        iterations: max_iter,
        residual: true_norm / b_norm,
    })
}

/// Cholesky factor of a symmetric positive definite band matrix.
///
/// Row `i` of `L` keeps columns `i - bw ..= i` in `data[i * (bw + 1)..]`,
/// left-padded for the first rows.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &CsrMatrix, bw: usize) -> Result<Self> {
        let n = a.dim();
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    if i - j > bw {
                        return Err(TfrError::Factorization(format!(
                            "entry ({i}, {j}) outside bandwidth {bw}"
                        )));
                    }
                    data[i * w + (j + bw - i)] = v;
                }
            }
        }
        for i in 0..n {
            let j_lo = i.saturating_sub(bw);
            for j in j_lo..=i {
                // Overlap of rows i and j in columns [max(i,j)-bw, j).
                let k_lo = j_lo.max(j.saturating_sub(bw));
                let (ri, rj) = (i * w + bw - i, j * w + bw - j);
                let mut s = data[ri + j];
                let row_i = &data[ri + k_lo..ri + j];
                let row_j = &data[rj + k_lo..rj + j];
                s -= row_i.iter().zip(row_j).map(|(a, b)| a * b).sum::<f64>();
                if i == j {
                    if !(s > 0.0) {
                        return Err(TfrError::Factorization(format!(
                            "matrix not positive definite at row {i}"
                        )));
                    }
                    data[ri + j] = s.sqrt();
                } else {
                    data[ri + j] = s / data[rj + j];
                }
            }
        }
        Ok(Self { n, bw, data })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            let s: f64 = self.data[ri + lo..ri + i]
                .iter()
                .zip(&y[lo..i])
                .map(|(l, y)| l * y)
                .sum();
            y[i] = (y[i] - s) / self.data[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            y[i] /= self.data[ri + i];
            let yi = y[i];
            let lo = i.saturating_sub(bw);
            for (yk, l) in y[lo..i].iter_mut().zip(&self.data[ri + lo..ri + i]) {
                *yk -= l * yi;
            }
        }
        y
    }
}

enum Backend {
    Iterative,
    Direct(BandCholesky),
}

/// Reusable solver for one system: the operator (and, for the direct method,
/// its factorization) is built once and shared by every intensity vector.
pub struct FieldSolver {
    disc: Discretization,
    cfg: SolverConfig,
    backend: Backend,
}

impl FieldSolver {
    pub fn new(spec: &SystemSpec, cfg: SolverConfig) -> Result<Self> {
        cfg.check()?;
        let disc = Discretization::new(spec)?;
        let backend = match cfg.method {
            SolverMethod::ConjugateGradient => Backend::Iterative,
            SolverMethod::Direct => {
                Backend::Direct(BandCholesky::factor(disc.matrix(), spec.domain.grid_n)?)
            }
        };
        Ok(Self { disc, cfg, backend })
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn solve(&self, q: &[f64]) -> Result<TemperatureField> {
        let phi = self.disc.power(q, true)?;
        self.solve_power(&phi)
    }

    /// Solves for an arbitrary cell-center power density.
    pub fn solve_power(&self, phi: &[f64]) -> Result<TemperatureField> {
        let n = self.disc.spec().domain.grid_n;
        if phi.len() != n * n {
            return Err(TfrError::Dimension(format!(
                "power density has {} values, grid has {}",
                phi.len(),
                n * n
            )));
        }
        let b = self.disc.rhs_from_power(phi);
        let a = self.disc.matrix();
        let x = match &self.backend {
            Backend::Iterative => {
                // Iterate on the deviation from the reference temperature so
                // roundoff scales with the deviation, not with ~300 K.
                let t_ref = self.disc.reference_temperature();
                let mut shifted = vec![0.0; n * n];
                a.mul_vec_into(&vec![t_ref; n * n], &mut shifted);
                shifted.iter_mut().zip(&b).for_each(|(s, b)| *s = b - *s);
                let mut theta = vec![0.0; n * n];
                let max_iter = self.cfg.max_iter.unwrap_or(20 * n * n);
                // Scale the tolerance so the residual bound still refers to b.
                let b_norm = norm(&b);
                let s_norm = norm(&shifted);
                if s_norm > 0.0 {
                    let tol = (self.cfg.rel_tol * b_norm / s_norm).min(self.cfg.rel_tol.max(1e-14));
                    conjugate_gradient(a, &shifted, &mut theta, tol, max_iter)?;
                }
                theta.iter().map(|t| t + t_ref).collect()
            }
            Backend::Direct(chol) => {
                let mut x = chol.solve(&b);
                let b_norm = norm(&b).max(f64::MIN_POSITIVE);
                let mut r = vec![0.0; b.len()];
                for _ in 0..3 {
                    a.mul_vec_into(&x, &mut r);
                    r.iter_mut().zip(&b).for_each(|(r, b)| *r = b - *r);
                    if norm(&r) <= 1e-3 * self.cfg.rel_tol * b_norm {
                        break;
                    }
                    let dx = chol.solve(&r);
                    x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
                }
                a.mul_vec_into(&x, &mut r);
                let res = r.iter().zip(&b).map(|(r, b)| (b - r) * (b - r)).sum::<f64>().sqrt() / b_norm;
                if res > self.cfg.rel_tol {
                    return Err(TfrError::Convergence {
                        iterations: 3,
                        residual: res,
                    });
                }
                x
            }
        };
        TemperatureField::new(n, x)
    }
}

/// Steady temperature field of `spec` under intensities `q`.
pub fn solve_field(spec: &SystemSpec, q: &[f64], cfg: &SolverConfig) -> Result<TemperatureField> {
    FieldSolver::new(spec, *cfg)?.solve(q)
}
