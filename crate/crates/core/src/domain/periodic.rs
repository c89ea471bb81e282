use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

/// A 1-periodic scalar function on the cell `[0,1)^d`, chosen from a small
/// set of parametric families. All families depend on the first coordinate
/// only, which makes them usable unchanged in one and two dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Periodic {
    Constant {
        value: f64,
    },
    /// `mean + amp * sin(2 pi x)`
    Sine {
        mean: f64,
        amp: f64,
    },
    /// `mean + amp * cos(2 pi x)`
    Cosine {
        mean: f64,
        amp: f64,
    },
    /// `mean + amp * |sin(2 pi x)|`, Lipschitz but not C^1.
    AbsSine {
        mean: f64,
        amp: f64,
    },
    /// `mean + sum_k (a_k cos(2 pi k x) + b_k sin(2 pi k x))`
    Trig {
        mean: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
}

impl Periodic {
    pub fn constant(value: f64) -> Self {
        Periodic::Constant { value }
    }

    pub fn sine(mean: f64, amp: f64) -> Self {
        Periodic::Sine { mean, amp }
    }

    pub fn cosine(mean: f64, amp: f64) -> Self {
        Periodic::Cosine { mean, amp }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let x1 = x[0];
        match self {
            Periodic::Constant { value } => *value,
            Periodic::Sine { mean, amp } => mean + amp * (TAU * x1).sin(),
            Periodic::Cosine { mean, amp } => mean + amp * (TAU * x1).cos(),
            Periodic::AbsSine { mean, amp } => mean + amp * (TAU * x1).sin().abs(),
            Periodic::Trig { mean, cos, sin } => {
                let mut v = *mean;
                for (k, a) in cos.iter().enumerate() {
                    v += a * (TAU * (k + 1) as f64 * x1).cos();
                }
                for (k, b) in sin.iter().enumerate() {
                    v += b * (TAU * (k + 1) as f64 * x1).sin();
                }
                v
            }
        }
    }

    pub fn is_constant(&self) -> Option<f64> {
        match self {
            Periodic::Constant { value } => Some(*value),
            Periodic::Sine { mean, amp } | Periodic::Cosine { mean, amp } | Periodic::AbsSine { mean, amp }
                if *amp == 0.0 =>
            {
                Some(*mean)
            }
            Periodic::Trig { mean, cos, sin } if cos.iter().chain(sin).all(|c| *c == 0.0) => Some(*mean),
            _ => None,
        }
    }

    /// `(min, max)` over the cell. Exact for the closed-form families,
    /// sampled on 4096 points for trigonometric sums.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Periodic::Constant { value } => (*value, *value),
            Periodic::Sine { mean, amp } | Periodic::Cosine { mean, amp } => (mean - amp.abs(), mean + amp.abs()),
            Periodic::AbsSine { mean, amp } => {
                if *amp >= 0.0 {
                    (*mean, mean + amp)
                } else {
                    (mean + amp, *mean)
                }
            }
            Periodic::Trig { .. } => {
                let n = 4096;
                (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                    let v = self.eval(&[i as f64 / n as f64, 0.0]);
                    (lo.min(v), hi.max(v))
                })
            }
        }
    }

    /// Pointwise multiple of the function.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Periodic::Constant { value } => Periodic::Constant { value: value * factor },
            Periodic::Sine { mean, amp } => Periodic::Sine {
                mean: mean * factor,
                amp: amp * factor,
            },
            Periodic::Cosine { mean, amp } => Periodic::Cosine {
                mean: mean * factor,
                amp: amp * factor,
            },
            Periodic::AbsSine { mean, amp } => Periodic::AbsSine {
                mean: mean * factor,
                amp: amp * factor,
            },
            Periodic::Trig { mean, cos, sin } => Periodic::Trig {
                mean: mean * factor,
                cos: cos.iter().map(|c| c * factor).collect(),
                sin: sin.iter().map(|c| c * factor).collect(),
            },
        }
    }

    /// The function plus a constant.
    pub fn shifted(&self, offset: f64) -> Self {
        match self {
            Periodic::Constant { value } => Periodic::Constant { value: value + offset },
            Periodic::Sine { mean, amp } => Periodic::Sine {
                mean: mean + offset,
                amp: *amp,
            },
            Periodic::Cosine { mean, amp } => Periodic::Cosine {
                mean: mean + offset,
                amp: *amp,
            },
            Periodic::AbsSine { mean, amp } => Periodic::AbsSine {
                mean: mean + offset,
                amp: *amp,
            },
            Periodic::Trig { mean, cos, sin } => Periodic::Trig {
                mean: mean + offset,
                cos: cos.clone(),
                sin: sin.clone(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_matches_sampling() {
        let fams = [
            Periodic::sine(1.0, 0.5),
            Periodic::cosine(2.0, -1.0),
            Periodic::AbsSine { mean: 0.5, amp: -0.25 },
            Periodic::Trig {
                mean: 0.0,
                cos: vec![1.0],
                sin: vec![0.0, 0.5],
            },
        ];
        for f in &fams {
            let (lo, hi) = f.range();
            for i in 0..1000 {
                let v = f.eval(&[i as f64 / 1000.0]);
                assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn scaled_and_shifted_are_pointwise() {
        let f = Periodic::sine(1.0, 0.5);
        let x = [0.3];
        assert!((f.scaled(2.0).eval(&x) - 2.0 * f.eval(&x)).abs() < 1e-15);
        assert!((f.shifted(0.7).eval(&x) - f.eval(&x) - 0.7).abs() < 1e-15);
    }
}
