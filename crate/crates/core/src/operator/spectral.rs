//! FFT diagonalisation of the constant-coefficient operator on a periodic
//! (optionally padded) box.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::domain::Grid;

/// Multiplier `c_{d,alpha}` of the symbol `c |xi|^{2 alpha}` of the operator
/// with unit kernel.
pub fn symbol_constant(d: usize, alpha: f64) -> f64 {
    use statrs::function::gamma::gamma;
    let half_d = d as f64 / 2.0;
    std::f64::consts::PI.powf(half_d) * gamma(1.0 - alpha) / (alpha * 4f64.powf(alpha) * gamma(half_d + alpha))
}

/// Transforms on a `d`-dimensional periodic grid of `m` points per axis.
#[derive(Clone)]
pub(crate) struct Spectral {
    pub d: usize,
    pub m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `c |xi|^{2 alpha}` on the transform grid.
    pub symbol: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("d", &self.d)
            .field("m", &self.m)
            .finish()
    }
}

impl Spectral {
    /// Plan for a periodic grid of `m` points per axis and spacing `h`.
    pub fn new(d: usize, m: usize, h: f64, alpha: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let c = symbol_constant(d, alpha);
        let freq = wavenumbers(m, h);
        let symbol = if d == 1 {
            freq.iter().map(|k| c * k.abs().powf(2.0 * alpha)).collect()
        } else {
            let mut s = Vec::with_capacity(m * m);
            for ky in &freq {
                for kx in &freq {
                    s.push(c * kx.hypot(*ky).powf(2.0 * alpha));
                }
            }
            s
        };
        Self { d, m, fwd, inv, symbol }
    }

    pub fn for_grid(grid: &Grid, padding: usize, alpha: f64) -> Self {
        Self::new(grid.d, grid.n_box * padding, grid.spacing(), alpha)
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    /// In-place transform; the inverse includes the `1/m^d` normalisation.
    pub fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let m = self.m;
        if self.d == 1 {
            plan.process(data);
        } else {
            for row in data.chunks_mut(m) {
                plan.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); m];
            for j in 0..m {
                for (i, c) in col.iter_mut().enumerate() {
                    *c = data[j + i * m];
                }
                plan.process(&mut col);
                for (i, c) in col.iter().enumerate() {
                    data[j + i * m] = *c;
                }
            }
        }
        if inverse {
            let scale = 1.0 / self.len() as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    /// `ifft(mult * fft(values))` for real input.
    pub fn multiply(&self, values: &[f64], mult: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut buf: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.transform(&mut buf, false);
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= mult(k);
        }
        self.transform(&mut buf, true);
        buf.iter().map(|c| c.re).collect()
    }
}

/// Angular wavenumbers of an `m`-point periodic grid with spacing `h`.
pub(crate) fn wavenumbers(m: usize, h: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / (m as f64 * h);
    (0..m)
        .map(|k| {
            let k = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
            base * k
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_matches_known_values() {
        assert!((symbol_constant(1, 0.5) - std::f64::consts::PI).abs() < 1e-12);
        // d = 2, alpha = 1/2: 2 pi
        assert!((symbol_constant(2, 0.5) - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        let m = 64;
        let h = 1.0 / m as f64;
        let sp = Spectral::new(1, m, h, 0.3);
        let v: Vec<f64> = (0..m)
            .map(|i| (2.0 * std::f64::consts::PI * 3.0 * i as f64 * h).cos())
            .collect();
        let out = sp.multiply(&v, |k| sp.symbol[k]);
        let lam = symbol_constant(1, 0.3) * (6.0 * std::f64::consts::PI).powf(0.6);
        for (a, b) in out.iter().zip(&v) {
            assert!((a - lam * b).abs() < 1e-10);
        }
    }

    #[test]
    fn two_dimensional_round_trip() {
        let sp = Spectral::new(2, 8, 0.25, 0.5);
        let v: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let back = sp.multiply(&v, |_| 1.0);
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
