//! Time integration of `dn/dt + L^alpha n = F(x, n)` on the box, the linear
//! semigroup, and the periodic steady state.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{CellField, Grid, ReactionModel, StableKernel, TailedField};
use crate::eigen::principal_eigenpair;
use crate::error::{Error, Result};
use crate::operator::{Backend, CellOperator, OperatorPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Forward Euler on the full right-hand side.
    Explicit,
    /// Backward Euler for the operator (Fourier multiplier) after an explicit
    /// reaction substep.
    Imex,
    /// Exact linear semigroup multiplier after the reaction substep.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub scheme: Scheme,
    pub backend: Backend,
    pub snap_every: f64,
}

impl EvolveOptions {
    /// IMEX on the periodic box for constant kernels, explicit quadrature
    /// otherwise.
    pub fn default_for(k: &StableKernel, snap_every: f64) -> Self {
        if k.constant_value().is_some() {
            Self {
                scheme: Scheme::Imex,
                backend: Backend::Spectral { padding: 1 },
                snap_every,
            }
        } else {
            Self {
                scheme: Scheme::Explicit,
                backend: Backend::Quadrature,
                snap_every,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub field: TailedField,
}

/// A step at which negative values were set to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEvent {
    pub step: usize,
    pub t: f64,
    pub count: usize,
    pub most_negative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBounds {
    pub t: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub scheme: Scheme,
    pub backend: Backend,
    /// Step actually used (the requested step, shrunk to divide `snap_every`).
    pub dt: f64,
    pub steps: usize,
    pub clips: Vec<ClipEvent>,
    pub bounds: Vec<StepBounds>,
    /// `max(M_cap, sup n0)`.
    pub upper_bound: f64,
    /// Largest relative excess over `upper_bound` seen at any step.
    pub bound_excess: f64,
}

impl Trajectory {
    pub fn grid(&self) -> &Grid {
        &self.snapshots[0].field.grid
    }

    pub fn t_end(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.t)
    }

    pub fn last(&self) -> &TailedField {
        &self.snapshots.last().expect("trajectory has snapshots").field
    }

    /// Snapshot closest to `t`.
    pub fn at(&self, t: f64) -> &Snapshot {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("trajectory has snapshots")
    }

    /// Snapshot times strictly increasing and values within the a priori box.
    pub fn check_invariants(&self) -> Result<()> {
        for w in self.snapshots.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::Numerical(format!(
                    "snapshot times {} and {} not increasing",
                    w[0].t, w[1].t
                )));
            }
        }
        for s in &self.snapshots {
            let (lo, hi) = (s.field.min(), s.field.sup());
            if lo < 0.0 || hi > self.upper_bound * (1.0 + BOX_SLACK) {
                return Err(Error::Numerical(format!(
                    "snapshot at t={} leaves [0, {}]: min {lo}, max {hi}",
                    s.t, self.upper_bound
                )));
            }
        }
        Ok(())
    }
}

/// Relative slack on the upper a priori bound (rounding in the transforms).
const BOX_SLACK: f64 = 1e-9;
/// Abort when the solution exceeds this multiple of the saturation level.
const BLOW_UP: f64 = 10.0;
/// Courant-type factor of the explicit bound `dt <= 0.4 / stiffness`.
const EXPLICIT_SAFETY: f64 = 0.4;

/// Largest stable step of the explicit scheme, `0.4 h^{2 alpha} / (B K_quad)`.
pub fn dt_max(plan: &OperatorPlan) -> f64 {
    EXPLICIT_SAFETY / plan.stiffness()
}

/// Raised-cosine bump `amp (1 + cos(pi r / w)) / 2` for `r = |x - c| < w`.
pub fn raised_cosine(grid: Grid, alpha: f64, center: &[f64], width: f64, amp: f64) -> Result<TailedField> {
    if !(width > 0.0 && amp >= 0.0) {
        return Err(Error::invalid(
            "initial",
            "bump needs positive width and nonnegative amplitude",
        ));
    }
    let mut f = TailedField::from_fn(grid, alpha, |x| {
        let r = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if r < width {
            0.5 * amp * (1.0 + (std::f64::consts::PI * r / width).cos())
        } else {
            0.0
        }
    })?;
    f.tail_amp = 0.0;
    Ok(f)
}

/// Advances `s' = c0 + c1 s + c2 s^2` by `dt` at one node: the exact
/// Bernoulli flow when `c0 = 0`, a forward Euler step otherwise.
fn reaction_flow(s: f64, c: &[f64; 3], dt: f64) -> f64 {
    if c[0] != 0.0 {
        return s + dt * (c[0] + s * (c[1] + c[2] * s));
    }
    let growth = if c[1] == 0.0 { dt } else { (c[1] * dt).exp_m1() / c[1] };
    let denom = 1.0 - c[2] * s * growth;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    s * (c[1] * dt).exp() / denom
}

enum Linear {
    Plan(OperatorPlan),
    Multiplier(OperatorPlan, f64),
}

pub fn evolve(
    k: &StableKernel,
    r: &ReactionModel,
    n0: &TailedField,
    t_end: f64,
    dt: f64,
    snap_every: f64,
) -> Result<Trajectory> {
    evolve_with(k, r, n0, t_end, dt, &EvolveOptions::default_for(k, snap_every))
}

pub fn evolve_with(
    k: &StableKernel,
    r: &ReactionModel,
    n0: &TailedField,
    t_end: f64,
    dt: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid("T", format!("{t_end} must be positive")));
    }
    if !(dt > 0.0 && opts.snap_every > 0.0) {
        return Err(Error::invalid("dt", "time step and snapshot cadence must be positive"));
    }
    n0.check_density()?;
    let grid = n0.grid;
    let plan = OperatorPlan::new(k, grid, opts.backend)?;
    let linear = match opts.scheme {
        Scheme::Explicit => {
            let limit = dt_max(&plan);
            if dt > limit * (1.0 + 1e-12) {
                return Err(Error::invalid(
                    "dt",
                    format!("{dt} exceeds the explicit stability bound {limit:.3e}"),
                ));
            }
            Linear::Plan(plan)
        }
        Scheme::Imex | Scheme::Exponential => {
            if opts.backend != (Backend::Spectral { padding: 1 }) {
                return Err(Error::Unsupported(
                    "implicit and exponential schemes need the spectral backend with padding 1".into(),
                ));
            }
            let beta = k.constant_value().expect("spectral plan has constant kernel");
            Linear::Multiplier(plan, beta)
        }
    };

    let coeffs: Vec<[f64; 3]> = (0..grid.len()).map(|i| r.poly(&grid.point(i)[..grid.d])).collect();
    let upper = r.m_cap.max(n0.sup());
    let blow_up = BLOW_UP * r.m_cap;

    let per_snap = (opts.snap_every / dt).ceil().max(1.0) as usize;
    let h = opts.snap_every / per_snap as f64;
    let n_snaps = (t_end / opts.snap_every - 1e-9).ceil() as usize;

    let mut cur = n0.clone();
    let mut traj = Trajectory {
        snapshots: vec![Snapshot {
            t: 0.0,
            field: n0.clone(),
        }],
        scheme: opts.scheme,
        backend: opts.backend,
        dt: h,
        steps: 0,
        clips: Vec::new(),
        bounds: Vec::new(),
        upper_bound: upper,
        bound_excess: 0.0,
    };
    let mut step = 0usize;
    for s in 1..=n_snaps {
        let t_snap = (s as f64 * opts.snap_every).min(t_end);
        let t_prev = (s - 1) as f64 * opts.snap_every;
        let sub = (((t_snap - t_prev) / h).round() as usize).max(1);
        let hs = (t_snap - t_prev) / sub as f64;
        for j in 0..sub {
            let next: Vec<f64> = match &linear {
                Linear::Plan(plan) => {
                    let lv = match plan.backend() {
                        Backend::Quadrature => plan.apply_extended(&cur)?,
                        Backend::Spectral { .. } => plan.apply(&cur)?.values,
                    };
                    cur.values
                        .iter()
                        .zip(lv.iter().zip(&coeffs))
                        .map(|(v, (l, c))| v + hs * (c[0] + v * (c[1] + c[2] * v) - l))
                        .collect()
                }
                Linear::Multiplier(plan, beta) => {
                    let rhs: Vec<f64> = cur
                        .values
                        .iter()
                        .zip(&coeffs)
                        .map(|(v, c)| reaction_flow(*v, c, hs))
                        .collect();
                    match opts.scheme {
                        Scheme::Imex => plan.periodic_multiplier(&rhs, |s| 1.0 / (1.0 + hs * beta * s))?,
                        _ => plan.periodic_multiplier(&rhs, |s| (-hs * beta * s).exp())?,
                    }
                }
            };
            step += 1;
            let t = t_prev + (j + 1) as f64 * hs;
            cur.values = next;
            let mut count = 0;
            let mut most_negative: f64 = 0.0;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (i, v) in cur.values.iter_mut().enumerate() {
                if v.is_nan() {
                    return Err(Error::non_finite("evolution", format!("node {i} at t={t}")));
                }
                if *v < 0.0 {
                    count += 1;
                    most_negative = most_negative.min(*v);
                    *v = 0.0;
                }
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
            if count > 0 {
                traj.clips.push(ClipEvent {
                    step,
                    t,
                    count,
                    most_negative,
                });
            }
            if hi > blow_up {
                return Err(Error::Numerical(format!(
                    "blow-up: sup n = {hi:.3e} exceeds 10 M_cap = {blow_up:.3e} at t = {t:.4}; reduce dt"
                )));
            }
            traj.bound_excess = traj.bound_excess.max((hi - upper) / upper);
            traj.bounds.push(StepBounds { t, min: lo, max: hi });
        }
        cur.refit_tail();
        traj.snapshots.push(Snapshot {
            t: t_snap,
            field: cur.clone(),
        });
    }
    traj.steps = step;
    Ok(traj)
}

/// Evolution with `F(x, s) = rate * s`; snapshots every `T / 10`.
pub fn linear_evolve(k: &StableKernel, rate: f64, n0: &TailedField, t_end: f64, dt: f64) -> Result<Trajectory> {
    evolve(k, &ReactionModel::linear(rate), n0, t_end, dt, t_end / 10.0)
}

pub fn linear_evolve_with(
    k: &StableKernel,
    rate: f64,
    n0: &TailedField,
    t_end: f64,
    dt: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    evolve_with(k, &ReactionModel::linear(rate), n0, t_end, dt, opts)
}

/// Positive periodic steady state `n_+` of the cell problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    pub n_plus: CellField,
    /// `sup |-L n_+ + F(x, n_+)|`.
    pub residual: f64,
    pub iterations: usize,
    pub lambda1: f64,
}

const STEADY_MAX_STEPS: usize = 500_000;

/// Time-marches the cell problem from `max(M_cap, 1)` until the residual
/// drops below `tol`.
pub fn steady_state(k: &StableKernel, r: &ReactionModel, cell_n: usize, tol: f64) -> Result<SteadyState> {
    steady_state_from(k, r, cell_n, tol, r.m_cap.max(1.0))
}

pub fn steady_state_from(
    k: &StableKernel,
    r: &ReactionModel,
    cell_n: usize,
    tol: f64,
    init: f64,
) -> Result<SteadyState> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if !(init > 0.0 && init.is_finite()) {
        return Err(Error::invalid("init", "initial level must be positive"));
    }
    let pair = principal_eigenpair(k, &r.media(), cell_n.max(32), 1e-10)?;
    if pair.lambda1 >= 0.0 {
        return Err(Error::Numerical(format!(
            "only trivial steady state expected: λ1 = {} ≥ 0",
            pair.lambda1
        )));
    }
    let op = CellOperator::new(k, cell_n)?;
    let d = k.d;
    let cell = CellField::constant(d, cell_n, 0.0);
    let coeffs: Vec<[f64; 3]> = (0..op.len()).map(|i| r.poly(&cell.point(i)[..d])).collect();
    let b_ref = op.beta().iter().fold(0.0f64, |m, v| m.max(*v));
    let s_max = init.max(r.m_cap);
    let dt = (0.5 / r.lipschitz(s_max).max(1e-3)).min(1.0);
    let mut n = vec![init; op.len()];
    let mut history = Vec::new();
    for it in 0..STEADY_MAX_STEPS {
        let an = op.apply_unit(&n);
        let f: Vec<f64> = n
            .iter()
            .zip(&coeffs)
            .map(|(v, c)| c[0] + v * (c[1] + c[2] * v))
            .collect();
        let residual = an
            .iter()
            .zip(op.beta())
            .zip(&f)
            .fold(0.0f64, |m, ((a, b), f)| m.max((f - b * a).abs()));
        if !residual.is_finite() {
            return Err(Error::non_finite("steady state", format!("iteration {it}")));
        }
        if it % 100 == 0 {
            history.push(residual);
        }
        if residual <= tol {
            let n_plus = CellField::new(d, cell_n, n)?;
            if n_plus.min() <= 0.0 {
                return Err(Error::Numerical("steady state is not positive".into()));
            }
            return Ok(SteadyState {
                n_plus,
                residual,
                iterations: it,
                lambda1: pair.lambda1,
            });
        }
        // (1 + dt B A) n' = n + dt (F(n) + (B - beta) A n)
        let rhs: Vec<f64> = n
            .iter()
            .zip(&f)
            .zip(an.iter().zip(op.beta()))
            .map(|((v, f), (a, b))| v + dt * (f + (b_ref - b) * a))
            .collect();
        n = op.multiplier(&rhs, |s| 1.0 / (1.0 + dt * b_ref * s));
    }
    let tail = history[history.len().saturating_sub(20)..].to_vec();
    Err(Error::NoConvergence {
        method: "steady-state time march".into(),
        message: format!("residual above {tol:.1e} after {STEADY_MAX_STEPS} steps"),
        history: tail,
    })
}

/// Writes a snapshot as little-endian binary: `d: u64`, `n_box: u64`,
/// `L: f64`, `alpha: f64`, then the `n_box^d` values row-major (the first
/// axis varies fastest within a row), then `tail_amp: f64`.
pub fn write_snapshot(field: &TailedField, w: &mut impl Write) -> Result<()> {
    w.write_all(&(field.grid.d as u64).to_le_bytes())?;
    w.write_all(&(field.grid.n_box as u64).to_le_bytes())?;
    w.write_all(&field.grid.l.to_le_bytes())?;
    w.write_all(&field.alpha.to_le_bytes())?;
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&field.tail_amp.to_le_bytes())?;
    Ok(())
}

/// Reads the layout of [`write_snapshot`]. The cell resolution is not
/// stored; `n_cell` supplies it.
pub fn read_snapshot(r: &mut impl Read, n_cell: usize) -> Result<TailedField> {
    let mut b = [0u8; 8];
    let mut word = |r: &mut dyn Read| -> Result<[u8; 8]> {
        r.read_exact(&mut b)?;
        Ok(b)
    };
    let d = u64::from_le_bytes(word(r)?) as usize;
    let n_box = u64::from_le_bytes(word(r)?) as usize;
    let l = f64::from_le_bytes(word(r)?);
    let alpha = f64::from_le_bytes(word(r)?);
    let grid = Grid::new(d, l, n_box, n_cell)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(f64::from_le_bytes(word(r)?));
    }
    let tail_amp = f64::from_le_bytes(word(r)?);
    Ok(TailedField {
        grid,
        values,
        tail_amp,
        background: 0.0,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Periodic;

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::new(1, 8.0, 32, 2).unwrap();
        let f = raised_cosine(g, 0.5, &[0.0], 2.0, 1.0).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 * (4 + 32 + 1));
        let back = read_snapshot(&mut buf.as_slice(), 2).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn explicit_step_bound_is_enforced() {
        let g = Grid::new(1, 8.0, 64, 4).unwrap();
        let k = StableKernel::isotropic(0.5, 1, Periodic::cosine(1.0, 0.2)).unwrap();
        let n0 = raised_cosine(g, 0.5, &[0.0], 1.0, 1.0).unwrap();
        let r = ReactionModel::logistic(Periodic::constant(1.0));
        let err = evolve(&k, &r, &n0, 1.0, 1.0, 0.5).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
