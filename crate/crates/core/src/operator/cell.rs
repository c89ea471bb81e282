use super::spectral::Spectral;
use crate::domain::{CellField, StableKernel};
use crate::error::{Error, Result};

/// `L^alpha` on the periodic unit cell, `beta(x)` times the Fourier
/// multiplier of the unit kernel.
#[derive(Debug, Clone)]
pub struct CellOperator {
    d: usize,
    n: usize,
    spectral: Spectral,
    beta: Vec<f64>,
}

impl CellOperator {
    pub fn new(kernel: &StableKernel, n: usize) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::invalid("cell_n", format!("{n} must be even and at least 4")));
        }
        let profile = kernel.isotropic_profile()?;
        let beta = CellField::from_periodic(kernel.d, n, profile).values;
        Ok(Self {
            d: kernel.d,
            n,
            spectral: Spectral::new(kernel.d, n, 1.0 / n as f64, kernel.alpha),
            beta,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of unknowns, `n^d`.
    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `c |xi|^{2 alpha}` in transform order.
    pub fn symbol(&self) -> &[f64] {
        &self.spectral.symbol
    }

    /// Constant-coefficient part `A v` (no `beta`).
    pub fn apply_unit(&self, v: &[f64]) -> Vec<f64> {
        let s = &self.spectral.symbol;
        self.spectral.multiply(v, |k| s[k])
    }

    /// `L v = beta A v`.
    pub fn apply_values(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.apply_unit(v);
        for (o, b) in out.iter_mut().zip(&self.beta) {
            *o *= b;
        }
        out
    }

    pub fn apply(&self, f: &CellField) -> Result<CellField> {
        if f.d != self.d || f.n != self.n {
            return Err(Error::invalid(
                "cell field",
                "resolution differs from the cell operator",
            ));
        }
        CellField::new(self.d, self.n, self.apply_values(&f.values))
    }

    /// Transform-space multiplier applied to cell values.
    pub fn multiplier(&self, v: &[f64], mult: impl Fn(f64) -> f64) -> Vec<f64> {
        let s = &self.spectral.symbol;
        self.spectral.multiply(v, |k| mult(s[k]))
    }

    /// First row of the circulant matrix of `A` (flat, first axis fastest).
    pub fn circulant_row(&self) -> Vec<f64> {
        let mut delta = vec![0.0; self.len()];
        delta[0] = 1.0;
        self.apply_unit(&delta)
    }
}
