//! Discretisations of the nonlocal operator `L^alpha` and its bilinear form
//! `K~`.

mod cell;
mod quadrature;
mod spectral;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{CellField, Grid, StableKernel, TailedField};
use crate::error::{Error, Result};
pub use cell::CellOperator;
use quadrature::{Offset, PvWeights};
pub use spectral::symbol_constant;
pub(crate) use spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Backend {
    /// Direct principal-value quadrature, `O(N^2)`, one dimension.
    Quadrature,
    /// FFT multiplier on a box enlarged by `padding` and filled with the far
    /// field. `padding = 1` is the periodic box.
    Spectral { padding: usize },
}

/// A function known at the box nodes and beyond (one-dimensional offsets).
pub trait Extended: Sync {
    fn grid(&self) -> &Grid;
    fn node(&self, i: usize) -> f64;
    /// Value at a point outside the box.
    fn outside(&self, x: &[f64]) -> f64;
    /// Limit used for the part of the line beyond the quadrature reach.
    fn at_infinity(&self) -> f64;
}

impl Extended for TailedField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn node(&self, i: usize) -> f64 {
        self.values[i]
    }
    fn outside(&self, x: &[f64]) -> f64 {
        self.far(x)
    }
    fn at_infinity(&self) -> f64 {
        self.background
    }
}

/// A periodic cell field laid over a box.
#[derive(Debug, Clone)]
pub struct PeriodicOnBox<'a> {
    grid: Grid,
    cell: &'a CellField,
    values: Vec<f64>,
    mean: f64,
}

impl<'a> PeriodicOnBox<'a> {
    pub fn new(grid: Grid, cell: &'a CellField) -> Result<Self> {
        let values = cell.on_box(&grid)?;
        let mean = cell.values.iter().sum::<f64>() / cell.values.len() as f64;
        Ok(Self {
            grid,
            cell,
            values,
            mean,
        })
    }
}

impl Extended for PeriodicOnBox<'_> {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn node(&self, i: usize) -> f64 {
        self.values[i]
    }
    fn outside(&self, x: &[f64]) -> f64 {
        self.cell.eval(x)
    }
    fn at_infinity(&self) -> f64 {
        self.mean
    }
}

/// Pointwise product of two extended functions on the same grid.
pub struct Product<'a, A: Extended, B: Extended>(pub &'a A, pub &'a B);

impl<A: Extended, B: Extended> Extended for Product<'_, A, B> {
    fn grid(&self) -> &Grid {
        self.0.grid()
    }
    fn node(&self, i: usize) -> f64 {
        self.0.node(i) * self.1.node(i)
    }
    fn outside(&self, x: &[f64]) -> f64 {
        self.0.outside(x) * self.1.outside(x)
    }
    fn at_infinity(&self) -> f64 {
        self.0.at_infinity() * self.1.at_infinity()
    }
}

/// Precomputed data for applying the operator on a fixed grid.
#[derive(Debug, Clone)]
pub struct OperatorPlan {
    kernel: StableKernel,
    grid: Grid,
    backend: Backend,
    beta: Vec<f64>,
    pv: Option<PvWeights>,
    spectral: Option<Spectral>,
}

impl OperatorPlan {
    pub fn new(kernel: &StableKernel, grid: Grid, backend: Backend) -> Result<Self> {
        if kernel.d != grid.d {
            return Err(Error::invalid(
                "grid",
                format!("kernel dimension {} does not match grid dimension {}", kernel.d, grid.d),
            ));
        }
        let profile = kernel.isotropic_profile()?;
        let beta = (0..grid.len())
            .map(|i| profile.eval(&grid.point(i)[..grid.d]))
            .collect();
        let (pv, spectral) = match backend {
            Backend::Quadrature => {
                if grid.d != 1 {
                    return Err(Error::Unsupported(
                        "the quadrature backend is one-dimensional; use the spectral backend in d = 2".into(),
                    ));
                }
                (Some(PvWeights::new(&grid, kernel.alpha)), None)
            }
            Backend::Spectral { padding } => {
                if kernel.constant_value().is_none() {
                    return Err(Error::Unsupported(
                        "the spectral backend needs a constant kernel; use the quadrature backend for heterogeneous β"
                            .into(),
                    ));
                }
                if padding == 0 || padding > 64 {
                    return Err(Error::invalid("padding", format!("{padding} is outside 1..=64")));
                }
                (None, Some(Spectral::for_grid(&grid, padding, kernel.alpha)))
            }
        };
        Ok(Self {
            kernel: kernel.clone(),
            grid,
            backend,
            beta,
            pv,
            spectral,
        })
    }

    pub fn quadrature(kernel: &StableKernel, grid: Grid) -> Result<Self> {
        Self::new(kernel, grid, Backend::Quadrature)
    }

    pub fn spectral(kernel: &StableKernel, grid: Grid, padding: usize) -> Result<Self> {
        Self::new(kernel, grid, Backend::Spectral { padding })
    }

    pub fn kernel(&self) -> &StableKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// `beta(x)` at the box nodes.
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Radius of the principal-value excision, `2h`.
    pub fn delta_pv(&self) -> f64 {
        2.0 * self.grid.spacing()
    }

    /// Largest diagonal coefficient of the discrete operator; bounds the
    /// spectrum of the quadrature matrix and the largest symbol value.
    pub fn stiffness(&self) -> f64 {
        let b = self.beta.iter().fold(0.0f64, |m, v| m.max(*v));
        match (&self.pv, &self.spectral) {
            (Some(pv), _) => 2.0 * b * pv.total(),
            (_, Some(sp)) => b * sp.symbol.iter().fold(0.0f64, |m, v| m.max(*v)),
            _ => unreachable!(),
        }
    }

    /// Smallest nodal quadrature weight; positive weights give a monotone
    /// explicit scheme.
    pub fn min_weight(&self) -> Option<f64> {
        self.pv.as_ref().map(|pv| pv.min_node_weight())
    }

    /// Tail part of the quadrature beyond its reach, `O(S^{-d-4 alpha})`
    /// relative to the tail amplitude.
    pub fn truncation_bound(&self, f: &TailedField) -> f64 {
        match &self.pv {
            Some(pv) => {
                let q = f.tail_exponent();
                let b = self.beta.iter().fold(0.0f64, |m, v| m.max(*v));
                2.0 * b * f.tail_amp.abs() * pv.s_max.powf(-q - 2.0 * self.kernel.alpha) / (q + 2.0 * self.kernel.alpha)
            }
            None => 0.0,
        }
    }

    fn check_grid(&self, g: &Grid) -> Result<()> {
        if g != &self.grid {
            return Err(Error::invalid("field", "field grid differs from the operator grid"));
        }
        Ok(())
    }

    fn pv(&self) -> Result<&PvWeights> {
        self.pv
            .as_ref()
            .ok_or_else(|| Error::Unsupported("operation requires the quadrature backend".into()))
    }

    /// Nodal values of `L u` for any extended function (quadrature backend).
    pub fn apply_extended<E: Extended>(&self, u: &E) -> Result<Vec<f64>> {
        self.check_grid(u.grid())?;
        let pv = self.pv()?;
        let g = &self.grid;
        let n = g.n_box;
        let h = g.spacing();
        let inf = u.at_infinity();
        let out: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = g.coord(i);
                let ui = u.node(i);
                let value = |m: isize| -> f64 {
                    let j = i as isize + m;
                    if j >= 0 && (j as usize) < n {
                        u.node(j as usize)
                    } else {
                        u.outside(&[x + m as f64 * h])
                    }
                };
                let d = |o: Offset| match o {
                    Offset::Node(m) => value(m as isize) + value(-(m as isize)) - 2.0 * ui,
                    Offset::Far(s) => u.outside(&[x + s]) + u.outside(&[x - s]) - 2.0 * ui,
                };
                -self.beta[i] * pv.integrate(d, 2.0 * (inf - ui))
            })
            .collect();
        finite(&out, g, "operator")?;
        Ok(out)
    }

    /// Nodal values of the bilinear form `K~(f, g)` (quadrature backend).
    pub fn bilinear_extended<A: Extended, B: Extended>(&self, f: &A, q: &B) -> Result<Vec<f64>> {
        self.check_grid(f.grid())?;
        self.check_grid(q.grid())?;
        let pv = self.pv()?;
        let g = &self.grid;
        let n = g.n_box;
        let h = g.spacing();
        let (finf, qinf) = (f.at_infinity(), q.at_infinity());
        let out: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = g.coord(i);
                let (fi, qi) = (f.node(i), q.node(i));
                let pair = |m: isize| -> (f64, f64) {
                    let j = i as isize + m;
                    if j >= 0 && (j as usize) < n {
                        (f.node(j as usize), q.node(j as usize))
                    } else {
                        let y = [x + m as f64 * h];
                        (f.outside(&y), q.outside(&y))
                    }
                };
                let e = |o: Offset| {
                    let (p, m) = match o {
                        Offset::Node(m) => (pair(m as isize), pair(-(m as isize))),
                        Offset::Far(s) => (
                            (f.outside(&[x + s]), q.outside(&[x + s])),
                            (f.outside(&[x - s]), q.outside(&[x - s])),
                        ),
                    };
                    (p.0 - fi) * (p.1 - qi) + (m.0 - fi) * (m.1 - qi)
                };
                self.beta[i] * pv.integrate(e, 2.0 * (finf - fi) * (qinf - qi))
            })
            .collect();
        finite(&out, g, "bilinear form")?;
        Ok(out)
    }

    fn apply_spectral(&self, f: &TailedField) -> Result<Vec<f64>> {
        let sp = self.spectral.as_ref().expect("spectral plan");
        let g = &self.grid;
        let (n, m) = (g.n_box, sp.m);
        let pad = m / n;
        let offset = (pad - 1) * n / 2;
        let h = g.spacing();
        let coord = |j: usize| -g.l - offset as f64 * h + j as f64 * h;
        let mut buf = vec![Complex64::new(0.0, 0.0); sp.len()];
        if g.d == 1 {
            for (j, b) in buf.iter_mut().enumerate() {
                let v = if j >= offset && j < offset + n {
                    f.values[j - offset]
                } else {
                    f.far(&[coord(j)])
                };
                *b = Complex64::new(v, 0.0);
            }
        } else {
            for jy in 0..m {
                for jx in 0..m {
                    let inside = jx >= offset && jx < offset + n && jy >= offset && jy < offset + n;
                    let v = if inside {
                        f.values[(jx - offset) + n * (jy - offset)]
                    } else {
                        f.far(&[coord(jx), coord(jy)])
                    };
                    buf[jx + m * jy] = Complex64::new(v, 0.0);
                }
            }
        }
        sp.transform(&mut buf, false);
        for (v, s) in buf.iter_mut().zip(&sp.symbol) {
            *v *= *s;
        }
        sp.transform(&mut buf, true);
        let out: Vec<f64> = (0..g.len())
            .map(|idx| {
                let a = g.axes(idx);
                let j = if g.d == 1 {
                    a[0] + offset
                } else {
                    (a[0] + offset) + m * (a[1] + offset)
                };
                self.beta[idx] * buf[j].re
            })
            .collect();
        finite(&out, g, "operator")?;
        Ok(out)
    }

    /// `L u` on the box as a tailed field (background zero, tail refitted).
    pub fn apply(&self, f: &TailedField) -> Result<TailedField> {
        self.check_grid(&f.grid)?;
        let values = match self.backend {
            Backend::Quadrature => self.apply_extended(f)?,
            Backend::Spectral { .. } => self.apply_spectral(f)?,
        };
        TailedField::from_values(self.grid, values, self.kernel.alpha)
    }

    /// Applies the transform-space multiplier `mult(symbol_k)` to a
    /// periodic box field (spectral backend without padding).
    pub fn periodic_multiplier(&self, values: &[f64], mult: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let sp = self
            .spectral
            .as_ref()
            .filter(|s| s.m == self.grid.n_box)
            .ok_or_else(|| {
                Error::Unsupported("periodic multiplier requires the spectral backend with padding 1".into())
            })?;
        Ok(sp.multiply(values, |k| mult(sp.symbol[k])))
    }
}

fn finite(values: &[f64], g: &Grid, what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::non_finite(what, format!("node {i} at {:?}", &g.point(i)[..g.d]))),
        None => Ok(()),
    }
}

/// `L^alpha f` on the box.
pub fn apply_operator(plan: &OperatorPlan, f: &TailedField) -> Result<TailedField> {
    plan.apply(f)
}

/// `K~(f, g)` for a box field `f` and a periodic function `g`.
pub fn apply_bilinear(plan: &OperatorPlan, f: &TailedField, g: &CellField) -> Result<TailedField> {
    let per = PeriodicOnBox::new(*plan.grid(), g)?;
    let values = plan.bilinear_extended(f, &per)?;
    TailedField::from_values(*plan.grid(), values, plan.kernel().alpha)
}

/// `|x|^{1/eps - 1} x`, the map to original coordinates.
pub fn rescale_point(x: &[f64], eps: f64) -> Vec<f64> {
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r == 0.0 {
        return x.to_vec();
    }
    let s = r.powf(1.0 / eps - 1.0);
    x.iter().map(|c| c * s).collect()
}

/// The operator applied to a snapshot taken at original time `t / eps`,
/// read at the rescaled point `x`: `(L^alpha n)(|x|^{1/eps-1} x, t/eps)`.
#[derive(Debug, Clone)]
pub struct RescaledOperator {
    lf: TailedField,
    eps: f64,
}

impl RescaledOperator {
    pub fn new(plan: &OperatorPlan, snapshot: &TailedField, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::invalid("eps", format!("{eps} is not in (0, 1]")));
        }
        Ok(Self {
            lf: plan.apply(snapshot)?,
            eps,
        })
    }

    pub fn at(&self, x: &[f64]) -> Result<f64> {
        let y = rescale_point(x, self.eps);
        if !self.lf.inside(&y) {
            return Err(Error::OutOfDomain(format!(
                "rescaled point {x:?} maps to {y:?}, outside the box of half-width {}; use a larger L or a larger eps",
                self.lf.grid.l
            )));
        }
        Ok(self.lf.eval(&y))
    }
}

/// Single-point convenience wrapper around [`RescaledOperator`]. The time of
/// the snapshot is implicit in `snapshot`.
pub fn apply_rescaled_operator(plan: &OperatorPlan, snapshot: &TailedField, eps: f64, x: &[f64]) -> Result<f64> {
    RescaledOperator::new(plan, snapshot, eps)?.at(x)
}
