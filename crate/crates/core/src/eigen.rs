//! Principal eigenpair of `L^alpha - mu Id` on the periodic cell.
//!
//! The cell operator is `beta(x) A` with `A` the Fourier multiplier of the
//! unit kernel. With `D = diag(beta)^{1/2}` the similar matrix
//! `D A D - diag(mu)` is symmetric, which gives both a dense reference
//! (`SymmetricEigen`) and a shifted inverse iteration whose solves use dense
//! LU on small cells and matrix-free conjugate gradients otherwise.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{CellField, EigenPair, Periodic, StableKernel};
use crate::error::{Error, Result};
use crate::operator::CellOperator;

/// Largest number of unknowns assembled densely for the inverse iteration.
const DENSE_SOLVE_MAX: usize = 1024;
const MAX_ITERATIONS: usize = 20_000;
/// Iterations without a residual improvement before giving up.
const STAGNATION_WINDOW: usize = 200;

/// Discretized eigenproblem on an `n^d` cell grid.
#[derive(Debug, Clone)]
pub struct CellProblem {
    op: CellOperator,
    mu: Vec<f64>,
    sqrt_beta: Vec<f64>,
}

impl CellProblem {
    pub fn new(kernel: &StableKernel, mu: &CellField) -> Result<Self> {
        if mu.d != kernel.d {
            return Err(Error::invalid(
                "mu",
                "media dimension differs from the kernel dimension",
            ));
        }
        let op = CellOperator::new(kernel, mu.n)?;
        if let Some(k) = mu.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite("mu", format!("cell node {k}")));
        }
        let sqrt_beta = op.beta().iter().map(|b| b.sqrt()).collect();
        Ok(Self {
            op,
            mu: mu.values.clone(),
            sqrt_beta,
        })
    }

    pub fn from_periodic(kernel: &StableKernel, mu: &Periodic, cell_n: usize) -> Result<Self> {
        Self::new(kernel, &CellField::from_periodic(kernel.d, cell_n, mu))
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn operator(&self) -> &CellOperator {
        &self.op
    }

    fn mu_max(&self) -> f64 {
        self.mu.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    /// `(D A D - mu) x`.
    fn apply_sym(&self, x: &[f64]) -> Vec<f64> {
        let dx: Vec<f64> = x.iter().zip(&self.sqrt_beta).map(|(a, b)| a * b).collect();
        let adx = self.op.apply_unit(&dx);
        adx.iter()
            .zip(&self.sqrt_beta)
            .zip(x.iter().zip(&self.mu))
            .map(|((a, b), (xi, m))| a * b - m * xi)
            .collect()
    }

    /// Dense symmetric matrix `D A D - diag(mu)`.
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let n = self.op.n();
        let d = self.op.d();
        let size = self.len();
        let row = self.op.circulant_row();
        let mut data = vec![0.0; size * size];
        data.par_chunks_mut(size).enumerate().for_each(|(k, col)| {
            for (j, v) in col.iter_mut().enumerate() {
                let off = if d == 1 {
                    (j + n - k) % n
                } else {
                    let (j1, j2, k1, k2) = (j % n, j / n, k % n, k / n);
                    (j1 + n - k1) % n + n * ((j2 + n - k2) % n)
                };
                *v = self.sqrt_beta[j] * row[off] * self.sqrt_beta[k];
                if j == k {
                    *v -= self.mu[j];
                }
            }
        });
        DMatrix::from_vec(size, size, data)
    }

    /// Sup-norm of `L phi - mu phi - lambda phi` evaluated by FFT, relative
    /// to `sup |phi|`.
    pub fn residual(&self, lambda: f64, phi: &[f64]) -> f64 {
        let lphi = self.op.apply_values(phi);
        let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let r = lphi
            .iter()
            .zip(phi.iter().zip(&self.mu))
            .fold(0.0f64, |m, (l, (p, mu))| m.max((l - mu * p - lambda * p).abs()));
        r / scale
    }

    fn to_pair(&self, lambda: f64, psi: &[f64]) -> Result<EigenPair> {
        let mut phi: Vec<f64> = psi.iter().zip(&self.sqrt_beta).map(|(a, b)| a * b).collect();
        if phi.iter().sum::<f64>() < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
        let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let residual = self.residual(lambda, &phi) * scale;
        EigenPair::new(lambda, CellField::new(self.op.d(), self.op.n(), phi)?, residual)
    }

    /// Smallest eigenvalue and its eigenvector from a full dense
    /// decomposition.
    pub fn dense_principal(&self) -> Result<EigenPair> {
        let (n, d) = (self.op.n(), self.op.d());
        if (d == 1 && n > 1024) || (d == 2 && n > 64) {
            return Err(Error::Unsupported(format!(
                "dense eigendecomposition is capped at 1024 (d=1) or 64x64 (d=2) cells, got n={n}"
            )));
        }
        let eig = SymmetricEigen::new(self.dense_matrix());
        let (k, lambda) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
        let psi: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        self.to_pair(lambda, &psi)
    }

    /// Shifted inverse power iteration from the constant vector with
    /// `sigma = -max mu - 1`.
    pub fn inverse_iteration(&self, tol: f64) -> Result<EigenPair> {
        let size = self.len();
        let sigma = -self.mu_max() - 1.0;
        let solver = if size <= DENSE_SOLVE_MAX {
            let mut m = self.dense_matrix();
            for i in 0..size {
                m[(i, i)] -= sigma;
            }
            Solver::Dense(m.lu())
        } else {
            Solver::Cg
        };
        let mut x = vec![1.0 / (size as f64).sqrt(); size];
        let mut history: Vec<f64> = Vec::new();
        let mut best = f64::INFINITY;
        let mut best_at = 0;
        for it in 0..MAX_ITERATIONS {
            let y = match &solver {
                Solver::Dense(lu) => lu
                    .solve(&DVector::from_column_slice(&x))
                    .ok_or_else(|| Error::Numerical("shifted cell matrix is singular".into()))?
                    .as_slice()
                    .to_vec(),
                Solver::Cg => self.cg_solve(&x, sigma)?,
            };
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::non_finite("inverse iteration", format!("iteration {it}")));
            }
            x = y.iter().map(|v| v / norm).collect();
            let mx = self.apply_sym(&x);
            let lambda: f64 = mx.iter().zip(&x).map(|(a, b)| a * b).sum();
            let res = mx
                .iter()
                .zip(&x)
                .fold(0.0f64, |m, (a, b)| m.max((a - lambda * b).abs()))
                / x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            history.push(res);
            if res <= 0.5 * tol * (1.0 + lambda.abs()) {
                let pair = self.to_pair(lambda, &x)?;
                if pair.residual <= tol * (1.0 + lambda.abs()) {
                    return Ok(pair);
                }
            }
            if res < best * (1.0 - 1e-3) {
                best = res;
                best_at = it;
            } else if it - best_at >= STAGNATION_WINDOW {
                return Err(stagnation(&history, tol));
            }
        }
        Err(stagnation(&history, tol))
    }

    /// Solves `(D A D - mu - sigma) y = b` by conjugate gradients.
    fn cg_solve(&self, b: &[f64], sigma: f64) -> Result<Vec<f64>> {
        let apply = |v: &[f64]| -> Vec<f64> {
            let mut out = self.apply_sym(v);
            for (o, vi) in out.iter_mut().zip(v) {
                *o -= sigma * vi;
            }
            out
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let bnorm = dot(b, b).sqrt();
        let mut x = vec![0.0; b.len()];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        for _ in 0..10 * b.len() {
            if rr.sqrt() <= 1e-15 * bnorm {
                return Ok(x);
            }
            let ap = apply(&p);
            let a = rr / dot(&p, &ap);
            for i in 0..x.len() {
                x[i] += a * p[i];
                r[i] -= a * ap[i];
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..p.len() {
                p[i] = r[i] + beta * p[i];
            }
        }
        if rr.sqrt() <= 1e-12 * bnorm {
            Ok(x)
        } else {
            Err(Error::NoConvergence {
                method: "conjugate gradients".into(),
                message: format!("relative residual {:.3e}", rr.sqrt() / bnorm),
                history: vec![rr.sqrt() / bnorm],
            })
        }
    }
}

enum Solver {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Cg,
}

fn stagnation(history: &[f64], tol: f64) -> Error {
    let tail = history[history.len().saturating_sub(20)..].to_vec();
    Error::NoConvergence {
        method: "inverse power iteration".into(),
        message: format!(
            "residual plateaued above tol={tol:.1e} after {} iterations",
            history.len()
        ),
        history: tail,
    }
}

/// Principal eigenpair of `L^alpha - mu Id` on a cell grid of `cell_n` points
/// per axis, certified to `residual <= tol (1 + |lambda1|)`.
pub fn principal_eigenpair(k: &StableKernel, mu: &Periodic, cell_n: usize, tol: f64) -> Result<EigenPair> {
    check_request(cell_n, tol)?;
    CellProblem::from_periodic(k, mu, cell_n)?.inverse_iteration(tol)
}

/// As [`principal_eigenpair`] for media given as cell samples.
pub fn principal_eigenpair_sampled(k: &StableKernel, mu: &CellField, tol: f64) -> Result<EigenPair> {
    check_request(mu.n, tol)?;
    CellProblem::new(k, mu)?.inverse_iteration(tol)
}

/// Dense reference for small cells.
pub fn dense_eigenpair(k: &StableKernel, mu: &Periodic, cell_n: usize) -> Result<EigenPair> {
    check_request(cell_n, 1e-12)?;
    CellProblem::from_periodic(k, mu, cell_n)?.dense_principal()
}

fn check_request(cell_n: usize, tol: f64) -> Result<()> {
    if cell_n < 32 || !cell_n.is_multiple_of(2) {
        return Err(Error::invalid(
            "cell_n",
            format!("{cell_n} must be even and at least 32"),
        ));
    }
    if !(tol >= 1e-12) {
        return Err(Error::invalid("tol", format!("{tol} is below 1e-12")));
    }
    Ok(())
}

/// Outcome of the invasion condition `lambda1 < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H3Check {
    pub holds: bool,
    /// `|lambda1|`.
    pub margin: f64,
}

pub fn check_h3(pair: &EigenPair) -> H3Check {
    H3Check {
        holds: pair.lambda1 < 0.0,
        margin: pair.lambda1.abs(),
    }
}

/// `|lambda1| / (d + 2 alpha)`, the growth rate of the log front radius.
pub fn predicted_exponent(pair: &EigenPair, d: usize, alpha: f64) -> Result<f64> {
    predicted_exponent_from(pair.lambda1, d, alpha)
}

pub fn predicted_exponent_from(lambda1: f64, d: usize, alpha: f64) -> Result<f64> {
    if lambda1 >= 0.0 {
        return Err(Error::Numerical(format!("no invasion predicted: λ1 = {lambda1} ≥ 0")));
    }
    Ok(-lambda1 / (d as f64 + 2.0 * alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_arithmetic() {
        assert!((predicted_exponent_from(-1.0, 1, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((predicted_exponent_from(-1.0, 1, 0.25).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((predicted_exponent_from(-2.0, 2, 0.75).unwrap() - 2.0 / 3.5).abs() < 1e-15);
        let e = predicted_exponent_from(0.0, 1, 0.5).unwrap_err();
        assert!(e.to_string().contains("no invasion predicted"));
    }

    #[test]
    fn rejects_coarse_cells_and_tiny_tolerances() {
        let k = StableKernel::constant(0.5, 1, 1.0).unwrap();
        assert!(principal_eigenpair(&k, &Periodic::constant(1.0), 16, 1e-10).is_err());
        assert!(principal_eigenpair(&k, &Periodic::constant(1.0), 32, 1e-14).is_err());
    }

    #[test]
    fn dense_and_iterative_agree_in_two_dimensions() {
        let k = StableKernel::isotropic(0.5, 2, Periodic::cosine(1.0, 0.3)).unwrap();
        let mu = Periodic::sine(1.0, 0.5);
        let a = dense_eigenpair(&k, &mu, 32).unwrap();
        let b = principal_eigenpair(&k, &mu, 32, 1e-10).unwrap();
        assert!((a.lambda1 - b.lambda1).abs() < 1e-9);
    }
}
