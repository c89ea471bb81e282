use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::periodic::Periodic;
use crate::error::{Error, Result};

/// Samples on the box plus an algebraic far field
/// `background + tail_amp / |x|^{d + 2 alpha}` used outside the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailedField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub tail_amp: f64,
    /// Constant far-field level. Zero for densities; constant fields carry
    /// their value here so that the padded representation stays constant.
    pub background: f64,
    pub alpha: f64,
}

/// Fraction of the box radius that forms the tail-fitting shell.
const SHELL: f64 = 0.9;

impl TailedField {
    /// Field with the tail amplitude fitted from the outer shell.
    pub fn from_values(grid: Grid, values: Vec<f64>, alpha: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "values",
                format!("expected {} samples, got {}", grid.len(), values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite("field", format!("node {i} at {:?}", grid.point(i))));
        }
        let mut f = Self {
            grid,
            values,
            tail_amp: 0.0,
            background: 0.0,
            alpha,
        };
        f.refit_tail();
        Ok(f)
    }

    pub fn from_fn(grid: Grid, alpha: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..grid.d])).collect();
        Self::from_values(grid, values, alpha)
    }

    pub fn constant(grid: Grid, value: f64, alpha: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
            tail_amp: 0.0,
            background: value,
            alpha,
        }
    }

    pub fn tail_exponent(&self) -> f64 {
        self.grid.d as f64 + 2.0 * self.alpha
    }

    /// Least-squares amplitude of `(v - background) |x|^{d+2 alpha}` over
    /// nodes with `|x|` in `[0.9 L, L]`.
    pub fn fit_tail(&self) -> f64 {
        let q = self.tail_exponent();
        let (mut sum, mut count) = (0.0, 0usize);
        for (i, v) in self.values.iter().enumerate() {
            let r = self.grid.norm(i);
            if r >= SHELL * self.grid.l && r <= self.grid.l {
                sum += (v - self.background) * r.powf(q);
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    pub fn refit_tail(&mut self) {
        self.tail_amp = self.fit_tail();
    }

    /// Largest relative mismatch between the shell samples and the fitted
    /// tail. `None` when the amplitude vanishes.
    pub fn tail_mismatch(&self) -> Option<f64> {
        if self.tail_amp == 0.0 {
            return None;
        }
        let q = self.tail_exponent();
        let mut worst: f64 = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let r = self.grid.norm(i);
            if r >= SHELL * self.grid.l && r <= self.grid.l {
                let model = self.tail_amp / r.powf(q);
                worst = worst.max(((v - self.background) - model).abs() / model.abs());
            }
        }
        Some(worst)
    }

    /// Density invariant: finite and nonnegative samples.
    pub fn check_density(&self) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::Numerical(format!(
                    "density sample {v} at {:?} is not a finite nonnegative number",
                    self.grid.point(i)
                )));
            }
        }
        Ok(())
    }

    /// Far-field model used outside the box.
    pub fn far(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        self.background + self.tail_amp / r.powf(self.tail_exponent())
    }

    /// Whether `x` lies inside the sampled box `[-L, L-h]^d`.
    pub fn inside(&self, x: &[f64]) -> bool {
        let (lo, hi) = (-self.grid.l, self.grid.last());
        x.iter().take(self.grid.d).all(|c| *c >= lo && *c <= hi)
    }

    /// Evaluates the field: multilinear interpolation inside the box, far
    /// field outside.
    pub fn eval(&self, x: &[f64]) -> f64 {
        if !self.inside(x) {
            return self.far(x);
        }
        let g = &self.grid;
        let h = g.spacing();
        let locate = |c: f64| -> (usize, f64) {
            let s = (c + g.l) / h;
            let i = (s.floor() as usize).min(g.n_box - 1);
            let w = s - i as f64;
            if i == g.n_box - 1 {
                (i - 1, 1.0)
            } else {
                (i, w)
            }
        };
        if g.d == 1 {
            let (i, w) = locate(x[0]);
            if w == 0.0 {
                return self.values[i];
            }
            (1.0 - w) * self.values[i] + w * self.values[i + 1]
        } else {
            let (i, wi) = locate(x[0]);
            let (j, wj) = locate(x[1]);
            let n = g.n_box;
            let v = |a: usize, b: usize| self.values[a + n * b];
            let mut out = (1.0 - wi) * (1.0 - wj) * v(i, j);
            if wi > 0.0 {
                out += wi * (1.0 - wj) * v(i + 1, j);
            }
            if wj > 0.0 {
                out += (1.0 - wi) * wj * v(i, j + 1);
                if wi > 0.0 {
                    out += wi * wj * v(i + 1, j + 1);
                }
            }
            out
        }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// `a * self + b * other` (same grid).
    pub fn combine(&self, a: f64, other: &TailedField, b: f64) -> Result<TailedField> {
        if self.grid != other.grid {
            return Err(Error::invalid("field", "fields live on different grids"));
        }
        Ok(TailedField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            tail_amp: a * self.tail_amp + b * other.tail_amp,
            background: a * self.background + b * other.background,
            alpha: self.alpha,
        })
    }
}

/// Samples of a periodic function on the cell grid `{k / n}^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellField {
    pub d: usize,
    pub n: usize,
    pub values: Vec<f64>,
}

impl CellField {
    pub fn new(d: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n.pow(d as u32) {
            return Err(Error::invalid("cell field", "sample count does not match n^d"));
        }
        Ok(Self { d, n, values })
    }

    pub fn from_periodic(d: usize, n: usize, p: &Periodic) -> Self {
        Self::from_fn(d, n, |x| p.eval(x))
    }

    pub fn from_fn(d: usize, n: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..n.pow(d as u32)).map(|k| f(&cell_point(d, n, k)[..d])).collect();
        Self { d, n, values }
    }

    pub fn constant(d: usize, n: usize, value: f64) -> Self {
        Self {
            d,
            n,
            values: vec![value; n.pow(d as u32)],
        }
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        cell_point(self.d, self.n, k)
    }

    /// Periodic multilinear interpolation; exact at cell nodes.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let locate = |c: f64| -> (usize, usize, f64) {
            let s = c.rem_euclid(1.0) * n as f64;
            let i = (s.floor() as usize) % n;
            let w = s - s.floor();
            (i, (i + 1) % n, w)
        };
        if self.d == 1 {
            let (i, j, w) = locate(x[0]);
            if w == 0.0 {
                self.values[i]
            } else {
                (1.0 - w) * self.values[i] + w * self.values[j]
            }
        } else {
            let (i0, i1, wi) = locate(x[0]);
            let (j0, j1, wj) = locate(x[1]);
            let v = |a: usize, b: usize| self.values[a + n * b];
            (1.0 - wi) * (1.0 - wj) * v(i0, j0)
                + wi * (1.0 - wj) * v(i1, j0)
                + (1.0 - wi) * wj * v(i0, j1)
                + wi * wj * v(i1, j1)
        }
    }

    /// Values of the periodic field at every node of `grid`.
    pub fn on_box(&self, grid: &Grid) -> Result<Vec<f64>> {
        if grid.n_cell != self.n || grid.d != self.d {
            return Err(Error::invalid(
                "cell field",
                format!("cell resolution {} does not match grid n_cell {}", self.n, grid.n_cell),
            ));
        }
        Ok((0..grid.len()).map(|i| self.values[grid.cell_index(i)]).collect())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }
}

fn cell_point(d: usize, n: usize, k: usize) -> [f64; 2] {
    let h = 1.0 / n as f64;
    if d == 1 {
        [k as f64 * h, 0.0]
    } else {
        [(k % n) as f64 * h, (k / n) as f64 * h]
    }
}
