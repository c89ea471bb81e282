use serde::{Deserialize, Serialize};

use super::kernel::low_discrepancy;
use super::periodic::Periodic;
use crate::error::{Error, Result};

/// Built-in reaction families `F(x, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionShape {
    /// `mu(x) s - s^2`
    Logistic { media: Periodic },
    /// `mu(x) s - omega(x) s^2`, `omega > 0`
    WeightedLogistic { media: Periodic, omega: Periodic },
    /// `rate * s`, the linear problems used for sub/super-solutions and the
    /// semigroup oracle.
    Linear { rate: f64 },
    /// `s^2`: superlinear, violates the KPP slope condition.
    Quadratic,
    /// `source + rate * s`: violates `F(x,0) = 0`.
    Source { source: f64, rate: f64 },
}

/// A reaction term with its declared KPP constants: `-c_lower <= d_s(F/s) <= -c_upper`
/// and `F(x, s) < 0` for `s >= m_cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionModel {
    pub shape: ReactionShape,
    pub c_lower: f64,
    pub c_upper: f64,
    pub m_cap: f64,
}

/// Relative inflation of the saturation level so that `F < 0` holds strictly at `m_cap`.
const CAP_MARGIN: f64 = 1e-6;

impl ReactionModel {
    pub fn logistic(media: Periodic) -> Self {
        let (_, hi) = media.range();
        Self {
            shape: ReactionShape::Logistic { media },
            c_lower: 1.0,
            c_upper: 1.0,
            m_cap: cap(hi),
        }
    }

    pub fn weighted_logistic(media: Periodic, omega: Periodic) -> Result<Self> {
        let (wlo, whi) = omega.range();
        if wlo <= 0.0 {
            return Err(Error::invalid("reaction.omega", "ω must be strictly positive"));
        }
        let (_, hi) = media.range();
        Ok(Self {
            shape: ReactionShape::WeightedLogistic { media, omega },
            c_lower: whi,
            c_upper: wlo,
            m_cap: cap(hi / wlo),
        })
    }

    pub fn linear(rate: f64) -> Self {
        Self {
            shape: ReactionShape::Linear { rate },
            c_lower: 0.0,
            c_upper: 0.0,
            m_cap: if rate < 0.0 { 0.0 } else { f64::INFINITY },
        }
    }

    pub fn quadratic() -> Self {
        Self {
            shape: ReactionShape::Quadratic,
            c_lower: 1.0,
            c_upper: 1.0,
            m_cap: 1.0,
        }
    }

    pub fn source(source: f64, rate: f64) -> Self {
        Self {
            shape: ReactionShape::Source { source, rate },
            c_lower: 1.0,
            c_upper: 1.0,
            m_cap: 1.0,
        }
    }

    pub fn f(&self, x: &[f64], s: f64) -> f64 {
        match &self.shape {
            ReactionShape::Logistic { media } => media.eval(x) * s - s * s,
            ReactionShape::WeightedLogistic { media, omega } => media.eval(x) * s - omega.eval(x) * s * s,
            ReactionShape::Linear { rate } => rate * s,
            ReactionShape::Quadratic => s * s,
            ReactionShape::Source { source, rate } => source + rate * s,
        }
    }

    /// Coefficients `[c0, c1, c2]` with `F(x, s) = c0 + c1 s + c2 s^2`.
    pub fn poly(&self, x: &[f64]) -> [f64; 3] {
        match &self.shape {
            ReactionShape::Logistic { media } => [0.0, media.eval(x), -1.0],
            ReactionShape::WeightedLogistic { media, omega } => [0.0, media.eval(x), -omega.eval(x)],
            ReactionShape::Linear { rate } => [0.0, *rate, 0.0],
            ReactionShape::Quadratic => [0.0, 0.0, 1.0],
            ReactionShape::Source { source, rate } => [*source, *rate, 0.0],
        }
    }

    /// `mu(x) = d_s F(x, 0)`.
    pub fn mu(&self, x: &[f64]) -> f64 {
        match &self.shape {
            ReactionShape::Logistic { media } | ReactionShape::WeightedLogistic { media, .. } => media.eval(x),
            ReactionShape::Linear { rate } | ReactionShape::Source { rate, .. } => *rate,
            ReactionShape::Quadratic => 0.0,
        }
    }

    /// The media `mu` as a periodic profile.
    pub fn media(&self) -> Periodic {
        match &self.shape {
            ReactionShape::Logistic { media } | ReactionShape::WeightedLogistic { media, .. } => media.clone(),
            ReactionShape::Linear { rate } | ReactionShape::Source { rate, .. } => Periodic::constant(*rate),
            ReactionShape::Quadratic => Periodic::constant(0.0),
        }
    }

    /// Upper bound of `|d_s F(x, s)|` for `0 <= s <= s_max`.
    pub fn lipschitz(&self, s_max: f64) -> f64 {
        match &self.shape {
            ReactionShape::Logistic { media } => {
                let (lo, hi) = media.range();
                lo.abs().max(hi.abs()) + 2.0 * s_max
            }
            ReactionShape::WeightedLogistic { media, omega } => {
                let (lo, hi) = media.range();
                lo.abs().max(hi.abs()) + 2.0 * omega.range().1 * s_max
            }
            ReactionShape::Linear { rate } | ReactionShape::Source { rate, .. } => rate.abs(),
            ReactionShape::Quadratic => 2.0 * s_max,
        }
    }
}

fn cap(level: f64) -> f64 {
    level.max(0.0) * (1.0 + CAP_MARGIN) + f64::EPSILON
}

/// Outcome of [`validate_reaction`].
#[derive(Debug, Clone, Serialize)]
pub struct ReactionReport {
    pub pass: bool,
    /// Largest `|F(x,0)|`.
    pub zero_defect: f64,
    /// Tightest empirical bounds: `-c_emp <= d_s(F/s) <= -cbar_emp`.
    pub c_lower_emp: f64,
    pub c_upper_emp: f64,
    /// Largest `F(x,s)` seen for `s >= m_cap` (must be negative).
    pub max_f_above_cap: f64,
    /// Largest `|mu(x) - centered FD of F at 0|`.
    pub mu_defect: f64,
    pub failures: Vec<String>,
}

/// Checks (H4 i-iv) on a lattice of `samples` cell points and 64 density
/// levels in `(0, s_max]`.
pub fn validate_reaction(r: &ReactionModel, d: usize, s_max: f64, samples: usize) -> Result<ReactionReport> {
    if !(s_max >= r.m_cap) {
        return Err(Error::invalid(
            "s_max",
            format!("s_max={s_max} must be >= M={}", r.m_cap),
        ));
    }
    if samples == 0 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    const LEVELS: usize = 64;
    let eta = 1e-5;
    let mut failures = Vec::new();
    let mut zero_defect: f64 = 0.0;
    let mut slope_min = f64::INFINITY;
    let mut slope_max = f64::NEG_INFINITY;
    let mut above: f64 = f64::NEG_INFINITY;
    let mut mu_defect: f64 = 0.0;
    let mut periodic_defect: f64 = 0.0;
    for j in 0..samples {
        let u = low_discrepancy(j, d);
        let x = &u[..d];
        let f0 = r.f(x, 0.0);
        if !f0.is_finite() {
            return Err(Error::non_finite("reaction F", format!("x={x:?}, s=0")));
        }
        if f0.abs() > zero_defect {
            zero_defect = f0.abs();
            if f0 != 0.0 {
                failures.push(format!("(H4 ii) F(x,0)={f0:e} at x={x:?}"));
            }
        }
        let fd = (r.f(x, eta) - r.f(x, -eta)) / (2.0 * eta);
        mu_defect = mu_defect.max((fd - r.mu(x)).abs());
        let mut shifted = x.to_vec();
        shifted[0] += 1.0;
        periodic_defect = periodic_defect.max((r.f(&shifted, 0.5 * s_max) - r.f(x, 0.5 * s_max)).abs());
        for l in 1..=LEVELS {
            let s = s_max * l as f64 / LEVELS as f64;
            let q = |s: f64| r.f(x, s) / s;
            let h = eta * s.max(1.0);
            let lo = (s - h).max(0.5 * s);
            let slope = (q(s + h) - q(lo)) / (s + h - lo);
            if !slope.is_finite() {
                return Err(Error::non_finite("reaction slope", format!("x={x:?}, s={s}")));
            }
            slope_min = slope_min.min(slope);
            slope_max = slope_max.max(slope);
            if s >= r.m_cap {
                above = above.max(r.f(x, s));
            }
        }
        if r.m_cap.is_finite() {
            above = above.max(r.f(x, r.m_cap));
        }
    }
    let fd_tol = 1e-6;
    if periodic_defect > 1e-10 {
        failures.push(format!("(H4 i) periodicity defect {periodic_defect:e}"));
    }
    if slope_max >= 0.0 {
        failures.push(format!("(H4 iii) slope of F/s reaches {slope_max:.4} >= 0"));
    }
    if slope_min < -r.c_lower - fd_tol || slope_max > -r.c_upper + fd_tol {
        failures.push(format!(
            "(H4 iii) empirical slopes [{slope_min:.4}, {slope_max:.4}] outside declared [-{}, -{}]",
            r.c_lower, r.c_upper
        ));
    }
    if !r.m_cap.is_finite() || above >= 0.0 {
        failures.push(format!("(H4 iv) F(x,s) reaches {above:e} for s >= M={}", r.m_cap));
    }
    if mu_defect > 1e-6 {
        failures.push(format!("μ differs from d_s F(x,0) by {mu_defect:e}"));
    }
    Ok(ReactionReport {
        pass: failures.is_empty(),
        zero_defect,
        c_lower_emp: -slope_min,
        c_upper_emp: -slope_max,
        max_f_above_cap: above,
        mu_defect,
        failures,
    })
}
