//! Principal-value quadrature of the one-dimensional stable operator on a
//! uniform grid.
//!
//! For a node `x` the operator reads `L u(x) = -beta(x) * I[D]` with
//! `I[D] = int_0^inf D(s) s^{-1-2 alpha} ds` and the symmetrized second
//! difference `D(s) = u(x+s) + u(x-s) - 2u(x)`. The half line is split into
//!
//! * `[0, 2h]`: `D(s) = a s^2 + b s^4` fitted through `D(h)`, `D(2h)` and
//!   integrated exactly;
//! * `[2h, M h]`: composite cubic product integration on grid offsets, with
//!   `M >= n_box` so both `x +- M h` leave the box for every node;
//! * `[M h, S_max]`: 64-point Gauss-Legendre in `log s` on the far-field model;
//! * `[S_max, inf)`: the constant part of the far field integrated exactly,
//!   the decaying part reported as an error bound.
//!
//! Every piece is a fixed linear combination of point values, so the same
//! weights applied to `(f(x)-f(x+s))(g(x)-g(x+s))` give the bilinear form
//! and the discrete product rule holds to rounding.

use crate::domain::Grid;
use crate::quadrature::GaussLegendre;

/// Offset at which an integrand is sampled.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Offset {
    /// `m h` for integer `m >= 1`.
    Node(usize),
    /// Arbitrary distance beyond the box.
    Far(f64),
}

#[derive(Debug, Clone)]
pub(crate) struct PvWeights {
    /// Near-field weights on `D(h)` and `D(2h)`.
    pub near: [f64; 2],
    /// `panel[m]` is the weight on `D(m h)` for `m = 2..=m_last`.
    pub panel: Vec<f64>,
    pub m_last: usize,
    /// Gauss-Legendre distances and weights beyond `m_last h`.
    pub far: Vec<(f64, f64)>,
    /// `int_{S_max}^inf s^{-1-2 alpha} ds`.
    pub at_infinity: f64,
    pub s_max: f64,
}

const PANEL_GL: usize = 16;
const FAR_GL: usize = 64;
/// Far-field quadrature extends to this multiple of the box radius.
const FAR_REACH: f64 = 1e3;

impl PvWeights {
    pub fn new(grid: &Grid, alpha: f64) -> Self {
        let h = grid.spacing();
        let scale = h.powf(-2.0 * alpha);
        let p2 = 2.0 - 2.0 * alpha;
        let p4 = 4.0 - 2.0 * alpha;
        let near = [
            scale * (16.0 * 2f64.powf(p2) / p2 - 4.0 * 2f64.powf(p4) / p4) / 12.0,
            scale * (-(2f64.powf(p2)) / p2 + 2f64.powf(p4) / p4) / 12.0,
        ];

        let panels = (grid.n_box.saturating_sub(2)).div_ceil(3).max(1);
        let m_last = 2 + 3 * panels;
        let mut panel = vec![0.0; m_last + 1];
        let gl = GaussLegendre::new(PANEL_GL);
        let expo = -1.0 - 2.0 * alpha;
        for p in 0..panels {
            let a = (2 + 3 * p) as f64;
            for (sigma, w) in gl.mapped(a, a + 3.0) {
                let k = sigma.powf(expo) * w;
                let t = sigma - a;
                // cubic Lagrange basis on nodes 0,1,2,3
                let l = [
                    -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
                    t * (t - 2.0) * (t - 3.0) / 2.0,
                    -t * (t - 1.0) * (t - 3.0) / 2.0,
                    t * (t - 1.0) * (t - 2.0) / 6.0,
                ];
                for (j, lj) in l.iter().enumerate() {
                    panel[2 + 3 * p + j] += scale * lj * k;
                }
            }
        }

        let s0 = m_last as f64 * h;
        let s_max = (FAR_REACH * grid.l).max(10.0 * s0);
        let far_rule = GaussLegendre::new(FAR_GL);
        let far = far_rule
            .mapped(s0.ln(), s_max.ln())
            .map(|(tau, w)| {
                let s = tau.exp();
                (s, w * s.powf(-2.0 * alpha))
            })
            .collect();
        let at_infinity = s_max.powf(-2.0 * alpha) / (2.0 * alpha);
        Self {
            near,
            panel,
            m_last,
            far,
            at_infinity,
            s_max,
        }
    }

    /// `sum_k w_k * integrand(offset_k)`, in a fixed order.
    pub fn integrate(&self, mut integrand: impl FnMut(Offset) -> f64, infinity_value: f64) -> f64 {
        let mut acc = self.near[0] * integrand(Offset::Node(1)) + self.near[1] * integrand(Offset::Node(2));
        let mut panel_sum = 0.0;
        for m in 2..=self.m_last {
            panel_sum += self.panel[m] * integrand(Offset::Node(m));
        }
        acc += panel_sum;
        let mut far_sum = 0.0;
        for &(s, w) in &self.far {
            far_sum += w * integrand(Offset::Far(s));
        }
        acc + far_sum + self.at_infinity * infinity_value
    }

    /// Total weight, i.e. the diagonal coefficient of the discrete operator
    /// divided by `2 beta`.
    pub fn total(&self) -> f64 {
        self.near.iter().sum::<f64>()
            + self.panel.iter().sum::<f64>()
            + self.far.iter().map(|(_, w)| w).sum::<f64>()
            + self.at_infinity
    }

    /// Smallest combined weight on a grid offset (near and panel parts).
    pub fn min_node_weight(&self) -> f64 {
        let mut w = self.panel.clone();
        w[1] += self.near[0];
        w[2] += self.near[1];
        w[1..].iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_weights_reproduce_kernel_moments() {
        let g = Grid::new(1, 8.0, 64, 4).unwrap();
        let alpha = 0.3;
        let w = PvWeights::new(&g, alpha);
        let h = g.spacing();
        // integrate s^2 * s^{-1-2a} over [2h, m_last h] exactly
        let p = 2.0 - 2.0 * alpha;
        let exact = ((w.m_last as f64 * h).powf(p) - (2.0 * h).powf(p)) / p;
        let approx: f64 = (2..=w.m_last).map(|m| w.panel[m] * (m as f64 * h).powi(2)).sum();
        assert!((approx - exact).abs() < 1e-10 * exact, "{approx} vs {exact}");
    }

    #[test]
    fn near_weights_integrate_the_quartic_fit() {
        let g = Grid::new(1, 8.0, 64, 4).unwrap();
        let alpha = 0.5;
        let w = PvWeights::new(&g, alpha);
        let h = g.spacing();
        // D(s) = s^4 -> exact integral over [0, 2h] is (2h)^{4-2a}/(4-2a)
        let exact = (2.0 * h).powf(3.0) / 3.0;
        let approx = w.near[0] * h.powi(4) + w.near[1] * (2.0 * h).powi(4);
        assert!((approx - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn weights_are_nonnegative_for_moderate_alpha() {
        for alpha in [0.25, 0.5, 0.6] {
            let g = Grid::new(1, 8.0, 128, 8).unwrap();
            let w = PvWeights::new(&g, alpha);
            assert!(w.min_node_weight() > 0.0, "alpha {alpha}: {}", w.min_node_weight());
        }
    }
}
