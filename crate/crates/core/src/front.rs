//! Analysis of trajectories: front radius, spreading exponent, rescaled
//! sampling, Hopf-Cole transform and the limit profile.

use serde::Serialize;

use crate::domain::{CellField, TailedField};
use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::operator::rescale_point;

/// Floor applied before taking logarithms of sampled densities.
pub const DENSITY_FLOOR: f64 = 1e-300;

fn check_plus(n_plus: &CellField) -> Result<()> {
    match n_plus.values.iter().position(|v| !(*v > 0.0)) {
        Some(k) => Err(Error::Numerical(format!(
            "n_plus vanishes at cell node {k}; the steady state must be positive"
        ))),
        None => Ok(()),
    }
}

/// Largest `|x|` with `n(x) / n_plus(x mod 1) >= level`, linearly
/// interpolated to the crossing in one dimension; 0 when nowhere.
pub fn front_radius(snapshot: &TailedField, n_plus: &CellField, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", format!("{level} is not in (0, 1)")));
    }
    check_plus(n_plus)?;
    let g = &snapshot.grid;
    let ratio = |i: usize| snapshot.values[i] / n_plus.eval(&g.point(i)[..g.d]);
    if g.d == 2 {
        let r = (0..g.len())
            .filter(|i| ratio(*i) >= level)
            .map(|i| g.norm(i))
            .fold(0.0f64, f64::max);
        return Ok(r);
    }
    let n = g.n_box;
    let mut best: f64 = 0.0;
    // right side: last node at or above the level, then interpolate outward
    if let Some(i) = (0..n).rev().find(|i| ratio(*i) >= level) {
        let r = if i + 1 < n {
            let (a, b) = (ratio(i), ratio(i + 1));
            g.coord(i) + g.spacing() * (a - level) / (a - b)
        } else {
            g.coord(i)
        };
        best = best.max(r.abs());
    }
    if let Some(i) = (0..n).find(|i| ratio(*i) >= level) {
        let r = if i > 0 {
            let (a, b) = (ratio(i), ratio(i - 1));
            g.coord(i) - g.spacing() * (a - level) / (a - b)
        } else {
            g.coord(i)
        };
        best = best.max(r.abs());
    }
    Ok(best)
}

/// Front radii at several levels for every snapshot.
pub fn front_series(traj: &Trajectory, n_plus: &CellField, levels: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
    traj.snapshots
        .iter()
        .map(|s| {
            let radii = levels
                .iter()
                .map(|c| front_radius(&s.field, n_plus, *c))
                .collect::<Result<Vec<_>>>()?;
            Ok((s.t, radii))
        })
        .collect()
}

/// Ordinary least squares of `log radius` against `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn spreading_exponent(series: &[(f64, f64)], window: (f64, f64)) -> Result<ExponentFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .copied()
        .collect();
    if pts.len() < 8 {
        return Err(Error::invalid(
            "fit window",
            format!("{} points in [{}, {}], need at least 8", pts.len(), window.0, window.1),
        ));
    }
    if let Some((t, _)) = pts.iter().find(|(_, r)| !(*r > 0.0)) {
        return Err(Error::Numerical(format!(
            "front not yet formed; shift window (radius 0 at t = {t})"
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(ExponentFit {
        slope,
        intercept,
        stderr,
        r2,
        points: pts.len(),
    })
}

/// A value of `n_eps(x, t)` and whether the far-field model supplied it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RescaledSample {
    pub value: f64,
    pub extrapolated: bool,
}

/// `n_eps(x, t) = n(|x|^{1/eps - 1} x, t / eps)`, linear in time between
/// snapshots and linear in space on the grid.
pub fn rescaled_sample(traj: &Trajectory, eps: f64, x: &[f64], t: f64) -> Result<RescaledSample> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid("eps", format!("{eps} is not in (0, 1]")));
    }
    let s = t / eps;
    let end = traj.t_end();
    if !(s >= 0.0) || s > end * (1.0 + 1e-12) {
        return Err(Error::OutOfDomain(format!(
            "t/eps = {s} is beyond the trajectory span {end}"
        )));
    }
    let y = rescale_point(x, eps);
    let snaps = &traj.snapshots;
    let k = snaps.partition_point(|p| p.t <= s).clamp(1, snaps.len().max(2) - 1);
    let (a, b) = if snaps.len() == 1 {
        (&snaps[0], &snaps[0])
    } else {
        (&snaps[k - 1], &snaps[k])
    };
    let w = if b.t > a.t {
        ((s - a.t) / (b.t - a.t)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let value = (1.0 - w) * a.field.eval(&y) + w * b.field.eval(&y);
    Ok(RescaledSample {
        value,
        extrapolated: !a.field.inside(&y),
    })
}

/// `u_eps = eps log n`.
pub fn hopf_cole(n: f64, eps: f64) -> Result<f64> {
    if !(n > 0.0) {
        return Err(Error::invalid(
            "n",
            format!("{n} must be positive; floor at {DENSITY_FLOOR:e} first"),
        ));
    }
    Ok(eps * n.ln())
}

/// `min(0, |lambda1| t - (d + 2 alpha) log |x|)`.
pub fn limit_profile(x: &[f64], t: f64, lambda1: f64, d: usize, alpha: f64) -> f64 {
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    (lambda1.abs() * t - (d as f64 + 2.0 * alpha) * r.ln()).min(0.0)
}

/// A point `(x, t)` in rescaled variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub x: Vec<f64>,
    pub t: f64,
}

impl Probe {
    pub fn new(x: &[f64], t: f64) -> Self {
        Self { x: x.to_vec(), t }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub eps: f64,
    pub probe: Probe,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonRow {
    pub eps: f64,
    /// `max n_eps` over the probes in `A`.
    pub max_a: Option<f64>,
    /// `max |n_eps / n_{+,eps} - 1|` over the probes in `B`.
    pub max_b: Option<f64>,
    /// `sup |u_eps - u|` over the lattice.
    pub sup_u: Option<f64>,
    pub lattice_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub lambda1: f64,
    pub rows: Vec<EpsilonRow>,
    pub decreasing_a: bool,
    pub decreasing_b: bool,
    pub skipped: Vec<Skipped>,
}

/// Required distance of a probe from the interface in the `u` metric.
pub const PROBE_MARGIN: f64 = 0.2;

/// Lattice used for `sup |u_eps - u|`: times `{1/2, 3/4, 1} * eps * T` and
/// 24 log-spaced radii in `[0.5, exp(0.8 |lambda1| eps T / (d + 2 alpha))]`.
pub fn profile_lattice(eps: f64, t_end: f64, lambda1: f64, d: usize, alpha: f64) -> Vec<Probe> {
    let t_eps = eps * t_end;
    let r_max = (0.8 * lambda1.abs() * t_eps / (d as f64 + 2.0 * alpha)).exp();
    let (a, b) = (0.5f64.ln(), r_max.ln());
    let mut out = Vec::new();
    for frac in [0.5, 0.75, 1.0] {
        for j in 0..24 {
            let r = (a + (b - a) * j as f64 / 23.0).exp();
            let mut x = vec![0.0; d];
            x[0] = r;
            out.push(Probe::new(&x, frac * t_eps));
        }
    }
    out
}

fn strictly_decreasing(v: &[Option<f64>]) -> bool {
    let vals: Vec<f64> = v.iter().flatten().copied().collect();
    vals.len() >= 2 && vals.windows(2).all(|w| w[1] < w[0])
}

/// Convergence diagnostics over a decreasing list of `eps`.
pub fn convergence_report(
    traj: &Trajectory,
    n_plus: &CellField,
    lambda1: f64,
    eps_list: &[f64],
    probes_a: &[Probe],
    probes_b: &[Probe],
) -> Result<ConvergenceReport> {
    check_plus(n_plus)?;
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("eps_list", "must be strictly decreasing"));
    }
    let g = *traj.grid();
    let (d, alpha) = (g.d, traj.last().alpha);
    let q = d as f64 + 2.0 * alpha;
    let signed = |p: &Probe| lambda1.abs() * p.t - q * p.x.iter().map(|c| c * c).sum::<f64>().sqrt().ln();
    for p in probes_a {
        if signed(p) > -PROBE_MARGIN {
            return Err(Error::invalid(
                "probes_a",
                format!("{p:?} is not inside A with margin {PROBE_MARGIN}"),
            ));
        }
    }
    for p in probes_b {
        if signed(p) < PROBE_MARGIN {
            return Err(Error::invalid(
                "probes_b",
                format!("{p:?} is not inside B with margin {PROBE_MARGIN}"),
            ));
        }
    }
    let mut skipped = Vec::new();
    let mut rows = Vec::new();
    let in_box = |eps: f64, p: &Probe| -> std::result::Result<(), String> {
        if p.t / eps > traj.t_end() * (1.0 + 1e-12) {
            return Err(format!("t/eps = {} beyond span {}", p.t / eps, traj.t_end()));
        }
        let y = rescale_point(&p.x, eps);
        if !traj.last().inside(&y) {
            return Err(format!("mapped point {y:?} outside the box"));
        }
        Ok(())
    };
    for &eps in eps_list {
        let mut max_a: Option<f64> = None;
        for p in probes_a {
            match in_box(eps, p) {
                Ok(()) => {
                    let v = rescaled_sample(traj, eps, &p.x, p.t)?.value;
                    max_a = Some(max_a.map_or(v, |m| m.max(v)));
                }
                Err(reason) => skipped.push(Skipped {
                    eps,
                    probe: p.clone(),
                    reason,
                }),
            }
        }
        let mut max_b: Option<f64> = None;
        for p in probes_b {
            match in_box(eps, p) {
                Ok(()) => {
                    let v = rescaled_sample(traj, eps, &p.x, p.t)?.value;
                    let plus = n_plus.eval(&rescale_point(&p.x, eps));
                    let dev = (v / plus - 1.0).abs();
                    max_b = Some(max_b.map_or(dev, |m| m.max(dev)));
                }
                Err(reason) => skipped.push(Skipped {
                    eps,
                    probe: p.clone(),
                    reason,
                }),
            }
        }
        let mut sup_u: Option<f64> = None;
        let mut count = 0;
        for p in profile_lattice(eps, traj.t_end(), lambda1, d, alpha) {
            if in_box(eps, &p).is_err() {
                continue;
            }
            let n = rescaled_sample(traj, eps, &p.x, p.t)?.value;
            let u = hopf_cole(n.max(DENSITY_FLOOR), eps)?;
            let dev = (u - limit_profile(&p.x, p.t, lambda1, d, alpha)).abs();
            sup_u = Some(sup_u.map_or(dev, |m| m.max(dev)));
            count += 1;
        }
        rows.push(EpsilonRow {
            eps,
            max_a,
            max_b,
            sup_u,
            lattice_points: count,
        });
    }
    let decreasing_a = strictly_decreasing(&rows.iter().map(|r| r.max_a).collect::<Vec<_>>());
    let decreasing_b = strictly_decreasing(&rows.iter().map(|r| r.max_b).collect::<Vec<_>>());
    Ok(ConvergenceReport {
        lambda1,
        rows,
        decreasing_a,
        decreasing_b,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hopf_cole_values() {
        assert_eq!(hopf_cole(1.0, 0.3).unwrap(), 0.0);
        assert!((hopf_cole((-10f64).exp(), 0.1).unwrap() + 1.0).abs() < 1e-14);
        assert!((hopf_cole((-4f64).exp(), 0.5).unwrap() + 2.0).abs() < 1e-14);
        assert!(hopf_cole(0.0, 0.5).is_err());
    }

    #[test]
    fn limit_profile_values() {
        let e = std::f64::consts::E;
        assert_eq!(limit_profile(&[1.0], 3.0, -1.0, 1, 0.5), 0.0);
        assert!(limit_profile(&[e], 2.0, -1.0, 1, 0.5).abs() < 1e-14);
        assert!((limit_profile(&[e * e], 2.0, -1.0, 1, 0.5) + 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_exponential_fit() {
        let s: Vec<(f64, f64)> = (0..20)
            .map(|i| (i as f64 * 0.5, (0.5 * i as f64 * 0.5).exp()))
            .collect();
        let f = spreading_exponent(&s, (0.0, 10.0)).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        let alg: Vec<(f64, f64)> = (1..=20).map(|i| (i as f64, (i as f64).powi(2))).collect();
        assert!(spreading_exponent(&alg, (1.0, 20.0)).unwrap().r2 < 0.95);
        let zero: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.0)).collect();
        assert!(spreading_exponent(&zero, (0.0, 10.0))
            .unwrap_err()
            .to_string()
            .contains("front not yet formed"));
    }
}
