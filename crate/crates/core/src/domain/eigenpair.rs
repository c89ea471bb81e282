use serde::Serialize;

use super::field::CellField;
use crate::error::{Error, Result};

/// Principal eigenpair of `L - mu Id` on the periodic cell, normalized so
/// that `max phi1 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub lambda1: f64,
    pub phi1: CellField,
    /// Sup-norm of `L phi1 - mu phi1 - lambda1 phi1` on the cell grid.
    pub residual: f64,
}

impl EigenPair {
    /// Normalizes `phi1` in sup-norm and enforces positivity.
    pub fn new(lambda1: f64, mut phi1: CellField, residual: f64) -> Result<Self> {
        if !lambda1.is_finite() || !residual.is_finite() {
            return Err(Error::non_finite(
                "eigenpair",
                format!("λ1={lambda1}, residual={residual}"),
            ));
        }
        let max = phi1.max();
        if !(max > 0.0) {
            return Err(Error::Numerical("eigenvector has no positive entry".into()));
        }
        for v in phi1.values.iter_mut() {
            *v /= max;
        }
        if let Some(k) = phi1.values.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Numerical(format!(
                "eigenvector is not positive at cell node {k} (value {}); discretization too coarse",
                phi1.values[k]
            )));
        }
        Ok(Self {
            lambda1,
            phi1,
            residual: residual / max,
        })
    }

    pub fn phi_min(&self) -> f64 {
        self.phi1.min()
    }

    pub fn phi_max(&self) -> f64 {
        self.phi1.max()
    }

    /// `phi1(x mod 1)` by periodic interpolation.
    pub fn phi(&self, x: &[f64]) -> f64 {
        self.phi1.eval(x)
    }
}

/// Constants of the sub-/super-solution envelopes.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope {
    pub c_m: f64,
    pub c_big_m: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// Exponent of the operator; sets the tail power `d + 2 alpha`.
    pub alpha: f64,
    /// KPP slope bounds `c_lower` and `c_upper` (both 1 for the logistic term).
    pub c_lower: f64,
    pub c_upper: f64,
    pub pair: EigenPair,
}

impl Envelope {
    /// Checks the admissibility window
    /// `C_m < |l1| / (c max phi)`, `C_M > |l1| / (C min phi)`,
    /// `0 < delta <= min(sqrt(C C_M min phi - |l1|), sqrt(|l1| - c C_m max phi))`
    /// and `epsilon < delta`.
    pub fn new(
        pair: EigenPair,
        alpha: f64,
        c_lower: f64,
        c_upper: f64,
        c_m: f64,
        c_big_m: f64,
        delta: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let env = Self::new_unchecked(pair, alpha, c_lower, c_upper, c_m, c_big_m, delta, epsilon);
        env.admissibility()?;
        Ok(env)
    }

    /// Builds an envelope without the admissibility check (negative controls).
    pub fn new_unchecked(
        pair: EigenPair,
        alpha: f64,
        c_lower: f64,
        c_upper: f64,
        c_m: f64,
        c_big_m: f64,
        delta: f64,
        epsilon: f64,
    ) -> Self {
        Self {
            c_m,
            c_big_m,
            delta,
            epsilon,
            alpha,
            c_lower,
            c_upper,
            pair,
        }
    }

    /// Largest admissible `delta` for the current `C_m`, `C_M`.
    pub fn delta_max(pair: &EigenPair, c_lower: f64, c_upper: f64, c_m: f64, c_big_m: f64) -> f64 {
        let l = pair.lambda1.abs();
        let a = c_upper * c_big_m * pair.phi_min() - l;
        let b = l - c_lower * c_m * pair.phi_max();
        if a <= 0.0 || b <= 0.0 {
            0.0
        } else {
            a.sqrt().min(b.sqrt())
        }
    }

    pub fn admissibility(&self) -> Result<()> {
        let l1 = self.pair.lambda1;
        let fail = |m: String| Err(Error::invalid("envelope", m));
        if !(l1 < 0.0) {
            return fail(format!("λ1 = {l1} must be negative"));
        }
        let l = l1.abs();
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("α ∈ (0,1) required, got {}", self.alpha));
        }
        if !(self.c_m > 0.0 && self.c_big_m > 0.0 && self.delta > 0.0 && self.epsilon > 0.0) {
            return fail("C_m, C_M, δ, ε must be positive".into());
        }
        let cm_max = l / (self.c_lower * self.pair.phi_max());
        if !(self.c_m < cm_max) {
            return fail(format!("C_m = {} must be < |λ1|/(c max φ1) = {cm_max}", self.c_m));
        }
        let cbig_min = l / (self.c_upper * self.pair.phi_min());
        if !(self.c_big_m > cbig_min) {
            return fail(format!("C_M = {} must be > |λ1|/(C min φ1) = {cbig_min}", self.c_big_m));
        }
        let dmax = Self::delta_max(&self.pair, self.c_lower, self.c_upper, self.c_m, self.c_big_m);
        if !(self.delta <= dmax) {
            return fail(format!("δ = {} exceeds the admissible {dmax}", self.delta));
        }
        if !(self.epsilon < self.delta) {
            return fail(format!("ε = {} must be < δ = {}", self.epsilon, self.delta));
        }
        Ok(())
    }

    /// Whether the constants also dominate the initial tail constants:
    /// `C_m < c_m / max phi1` and `C_M > c_M / min phi1`.
    pub fn compatible_with_initial(&self, c_m_init: f64, c_big_m_init: f64) -> bool {
        self.c_m < c_m_init / self.pair.phi_max() && self.c_big_m > c_big_m_init / self.pair.phi_min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(lambda1: f64) -> EigenPair {
        let phi = CellField::from_fn(1, 16, |x| 1.0 + 0.2 * (std::f64::consts::TAU * x[0]).cos());
        EigenPair::new(lambda1, phi, 0.0).unwrap()
    }

    #[test]
    fn normalization_and_positivity() {
        let p = pair(-1.0);
        assert!((p.phi_max() - 1.0).abs() < 1e-12);
        assert!(p.phi_min() > 0.0);
        let bad = CellField::new(1, 4, vec![1.0, 0.5, -0.1, 0.2]).unwrap();
        assert!(EigenPair::new(-1.0, bad, 0.0).is_err());
    }

    #[test]
    fn admissible_envelope_accepted_and_bad_ones_rejected() {
        let p = pair(-1.0);
        let dmax = Envelope::delta_max(&p, 1.0, 1.0, 0.1, 3.0);
        assert!(Envelope::new(p.clone(), 0.5, 1.0, 1.0, 0.1, 3.0, dmax, 0.5 * dmax).is_ok());
        // C_M too small
        assert!(Envelope::new(p.clone(), 0.5, 1.0, 1.0, 0.1, 1.0, 0.1, 0.05).is_err());
        // epsilon >= delta
        assert!(Envelope::new(p.clone(), 0.5, 1.0, 1.0, 0.1, 3.0, 0.3, 0.3).is_err());
        // lambda1 >= 0
        assert!(Envelope::new(pair(0.5), 0.5, 1.0, 1.0, 0.1, 3.0, 0.3, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn acceptance_is_monotone_in_constants(
            cm in 0.01f64..0.9, cbig in 1.0f64..5.0, grow in 1.0f64..3.0, shrink in 0.1f64..1.0,
            dfrac in 0.1f64..1.0
        ) {
            let p = pair(-1.0);
            let dmax = Envelope::delta_max(&p, 1.0, 1.0, cm, cbig);
            let delta = dfrac * dmax;
            if let Ok(env) = Envelope::new(p.clone(), 0.5, 1.0, 1.0, cm, cbig, delta, 0.5 * delta) {
                let wider = Envelope::new(env.pair.clone(), 0.5, 1.0, 1.0, cm * shrink, cbig * grow, delta, 0.5 * delta);
                prop_assert!(wider.is_ok());
            }
        }
    }
}
