use serde::{Deserialize, Serialize};

use super::periodic::Periodic;
use crate::error::{Error, Result};

/// Angular/spatial profile `beta(x, theta)` of the jump kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelShape {
    /// `beta(x, theta) = base(x)`: symmetric in theta by construction.
    Isotropic { base: Periodic },
    /// `beta(x, theta) = base(x) + tilt(x) * theta_1`: odd in theta unless
    /// `tilt` vanishes, so it fails the symmetry requirement. Kept as a
    /// validation control.
    OddTilt { base: Periodic, tilt: Periodic },
}

/// The stable operator's data: exponent `alpha`, profile `beta` and the
/// declared bounds `b_lower <= beta <= b_upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableKernel {
    pub alpha: f64,
    pub d: usize,
    pub shape: KernelShape,
    pub b_lower: f64,
    pub b_upper: f64,
}

impl StableKernel {
    pub fn new(alpha: f64, d: usize, shape: KernelShape, b_lower: f64, b_upper: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("α ∈ (0,1) required, got {alpha}")));
        }
        if d != 1 && d != 2 {
            return Err(Error::invalid("dimension", format!("d ∈ {{1,2}} required, got {d}")));
        }
        if !(b_lower > 0.0 && b_upper >= b_lower && b_upper.is_finite()) {
            return Err(Error::invalid(
                "kernel.b",
                format!("need 0 < b <= B < inf, got b={b_lower}, B={b_upper}"),
            ));
        }
        Ok(Self {
            alpha,
            d,
            shape,
            b_lower,
            b_upper,
        })
    }

    /// Isotropic kernel with bounds taken from the profile's range.
    pub fn isotropic(alpha: f64, d: usize, base: Periodic) -> Result<Self> {
        let (lo, hi) = base.range();
        Self::new(alpha, d, KernelShape::Isotropic { base }, lo, hi)
    }

    /// The fractional Laplacian kernel `beta = value`.
    pub fn constant(alpha: f64, d: usize, value: f64) -> Result<Self> {
        Self::isotropic(alpha, d, Periodic::constant(value))
    }

    /// Tail exponent `d + 2 alpha`.
    pub fn tail_exponent(&self) -> f64 {
        self.d as f64 + 2.0 * self.alpha
    }

    pub fn beta(&self, x: &[f64], theta: &[f64]) -> f64 {
        match &self.shape {
            KernelShape::Isotropic { base } => base.eval(x),
            KernelShape::OddTilt { base, tilt } => base.eval(x) + tilt.eval(x) * theta[0],
        }
    }

    /// `beta(x, .)` for a kernel that does not depend on direction.
    /// Errors on direction-dependent profiles.
    pub fn isotropic_profile(&self) -> Result<&Periodic> {
        match &self.shape {
            KernelShape::Isotropic { base } => Ok(base),
            KernelShape::OddTilt { .. } => Err(Error::invalid(
                "kernel",
                "β(x,θ)=β(x,−θ) is required by the operator; odd_tilt kernels are for validation only",
            )),
        }
    }

    /// `Some(beta)` when the kernel is constant in both arguments.
    pub fn constant_value(&self) -> Option<f64> {
        match &self.shape {
            KernelShape::Isotropic { base } => base.is_constant(),
            KernelShape::OddTilt { .. } => None,
        }
    }

    /// Kernel with `beta` multiplied by `factor` (bounds scaled accordingly).
    pub fn scaled(&self, factor: f64) -> Self {
        let shape = match &self.shape {
            KernelShape::Isotropic { base } => KernelShape::Isotropic {
                base: base.scaled(factor),
            },
            KernelShape::OddTilt { base, tilt } => KernelShape::OddTilt {
                base: base.scaled(factor),
                tilt: tilt.scaled(factor),
            },
        };
        Self {
            shape,
            b_lower: self.b_lower * factor,
            b_upper: self.b_upper * factor,
            ..self.clone()
        }
    }
}

/// Outcome of [`validate_kernel`].
#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub pass: bool,
    pub symmetry_defect: f64,
    pub bound_violation: f64,
    pub periodicity_defect: f64,
    pub worst: Option<String>,
}

const GOLDEN: [f64; 3] = [
    0.618_033_988_749_894_9,
    0.754_877_666_246_692_7,
    0.569_840_290_998_053_3,
];
const STRUCTURAL_TOL: f64 = 1e-12;

/// Deterministic additive-recurrence point `j` in `[0,1)^dim`.
pub(crate) fn low_discrepancy(j: usize, dim: usize) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate().take(dim) {
        *o = (0.5 + j as f64 * GOLDEN[k]).fract();
    }
    out
}

/// Checks symmetry in theta, the declared bounds and 1-periodicity on a
/// low-discrepancy sample of `(x, theta)`.
pub fn validate_kernel(k: &StableKernel, samples: usize) -> Result<KernelReport> {
    if samples < 100 {
        return Err(Error::invalid("samples", "at least 100 samples required"));
    }
    let mut sym: f64 = 0.0;
    let mut bound: f64 = 0.0;
    let mut per: f64 = 0.0;
    let mut worst: Option<(f64, String)> = None;
    let mut note = |defect: f64, what: &str, x: &[f64], theta: &[f64]| {
        if defect > STRUCTURAL_TOL && worst.as_ref().is_none_or(|(w, _)| defect > *w) {
            worst = Some((defect, format!("{what} defect {defect:.3e} at x={x:?}, θ={theta:?}")));
        }
    };
    for j in 0..samples {
        let u = low_discrepancy(j, k.d + 1);
        let x: Vec<f64> = u[..k.d].to_vec();
        let theta: Vec<f64> = if k.d == 1 {
            vec![1.0]
        } else {
            let a = std::f64::consts::TAU * u[2];
            vec![a.cos(), a.sin()]
        };
        let minus: Vec<f64> = theta.iter().map(|t| -t).collect();
        let b = k.beta(&x, &theta);
        let bm = k.beta(&x, &minus);
        if !b.is_finite() || !bm.is_finite() {
            return Err(Error::non_finite("kernel β", format!("x={x:?}, θ={theta:?}")));
        }
        let s = (b - bm).abs();
        sym = sym.max(s);
        note(s, "symmetry", &x, &theta);
        for v in [b, bm] {
            let viol = (k.b_lower - v).max(v - k.b_upper).max(0.0);
            bound = bound.max(viol);
            note(viol, "bound", &x, &theta);
        }
        if k.b_lower <= 0.0 {
            bound = bound.max(-k.b_lower);
        }
        for axis in 0..k.d {
            let mut xs = x.clone();
            xs[axis] += 1.0;
            let p = (k.beta(&xs, &theta) - b).abs();
            per = per.max(p);
            note(p, "periodicity", &x, &theta);
        }
    }
    let pass = sym <= STRUCTURAL_TOL && bound <= STRUCTURAL_TOL && per <= STRUCTURAL_TOL;
    Ok(KernelReport {
        pass,
        symmetry_defect: sym,
        bound_violation: bound,
        periodicity_defect: per,
        worst: worst.map(|(_, s)| s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_kernel_passes_with_zero_defects() {
        let k = StableKernel::constant(0.5, 1, 1.0).unwrap();
        let r = validate_kernel(&k, 200).unwrap();
        assert!(r.pass);
        assert_eq!(r.symmetry_defect, 0.0);
        assert_eq!(r.bound_violation, 0.0);
        assert_eq!(r.periodicity_defect, 0.0);
    }

    #[test]
    fn odd_tilt_fails_symmetry() {
        let k = StableKernel::new(
            0.5,
            1,
            KernelShape::OddTilt {
                base: Periodic::constant(2.0),
                tilt: Periodic::sine(0.0, 1.0),
            },
            1.0,
            3.0,
        )
        .unwrap();
        let r = validate_kernel(&k, 500).unwrap();
        assert!(!r.pass);
        // defect is 2|sin(2 pi x)|, close to 2 on a dense sample
        assert!(r.symmetry_defect > 1.9 && r.symmetry_defect <= 2.0 + 1e-12);
        assert!(r.worst.unwrap().contains("symmetry"));
    }

    #[test]
    fn cosine_kernel_with_attained_bounds_passes() {
        let k = StableKernel::new(
            0.5,
            1,
            KernelShape::Isotropic {
                base: Periodic::cosine(2.0, 1.0),
            },
            1.0,
            3.0,
        )
        .unwrap();
        assert!(validate_kernel(&k, 1000).unwrap().pass);
    }

    #[test]
    fn declared_bounds_too_tight_fail() {
        let k = StableKernel::new(
            0.5,
            2,
            KernelShape::Isotropic {
                base: Periodic::cosine(2.0, 1.0),
            },
            1.5,
            3.0,
        )
        .unwrap();
        let r = validate_kernel(&k, 1000).unwrap();
        assert!(!r.pass && r.bound_violation > 0.4);
    }

    #[test]
    fn alpha_out_of_range_is_rejected() {
        let e = StableKernel::constant(1.5, 1, 1.0).unwrap_err();
        assert!(e.to_string().contains("α ∈ (0,1)"));
        assert!(StableKernel::constant(0.0, 1, 1.0).is_err());
        assert!(StableKernel::constant(0.5, 3, 1.0).is_err());
    }

    #[test]
    fn non_finite_beta_is_reported() {
        let k = StableKernel {
            alpha: 0.5,
            d: 1,
            shape: KernelShape::Isotropic {
                base: Periodic::constant(f64::NAN),
            },
            b_lower: 1.0,
            b_upper: 1.0,
        };
        let e = validate_kernel(&k, 100).unwrap_err();
        assert!(matches!(e, Error::NonFinite { .. }));
        assert!(e.to_string().contains("x="));
    }

    #[test]
    fn too_few_samples_rejected() {
        let k = StableKernel::constant(0.5, 1, 1.0).unwrap();
        assert!(validate_kernel(&k, 10).is_err());
    }
}
