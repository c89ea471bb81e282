use std::f64::consts::PI;

use fkpp::domain::{CellField, Periodic, StableKernel};
use fkpp::eigen::{
    check_h3, dense_eigenpair, predicted_exponent, principal_eigenpair, principal_eigenpair_sampled, CellProblem,
};
use proptest::prelude::*;

/// `lambda1` for `mu = 1 + 0.5 sin(2 pi x)`, `alpha = 1/2`, unit kernel.
const GOLDEN_LAMBDA1: f64 = -1.006_331_051_090_629;

/// Smallest eigenvalue of the Fourier-Galerkin matrix
/// `diag(pi * 2 pi |k|) - 1 - 0.25 (shift_+ + shift_-)`, |k| <= kmax,
/// by Sturm-sequence bisection.
fn galerkin_oracle(kmax: i64) -> f64 {
    let diag: Vec<f64> = (-kmax..=kmax).map(|k| PI * 2.0 * PI * k.abs() as f64 - 1.0).collect();
    let off = -0.25f64;
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for (i, d) in diag.iter().enumerate() {
            q = d - x - if i == 0 { 0.0 } else { off * off / q };
            if q == 0.0 {
                q = 1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (-3.0, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn unit(alpha: f64) -> StableKernel {
    StableKernel::constant(alpha, 1, 1.0).unwrap()
}

#[test]
fn galerkin_oracle_is_converged() {
    assert!((galerkin_oracle(200) - galerkin_oracle(800)).abs() < 1e-14);
    assert!((galerkin_oracle(800) - GOLDEN_LAMBDA1).abs() < 1e-14);
}

#[test]
fn constant_media_gives_constant_eigenfunction() {
    for m0 in [0.5, 1.0, 3.0] {
        let p = principal_eigenpair(&unit(0.5), &Periodic::constant(m0), 64, 1e-10).unwrap();
        assert!((p.lambda1 + m0).abs() < 1e-10);
        assert!(p.phi1.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }
}

#[test]
fn shifting_the_media_shifts_the_eigenvalue() {
    let k = StableKernel::isotropic(0.4, 1, Periodic::cosine(1.0, 0.4)).unwrap();
    let a = principal_eigenpair(&k, &Periodic::sine(1.0, 0.5), 64, 1e-11).unwrap();
    let b = principal_eigenpair(&k, &Periodic::sine(1.7, 0.5), 64, 1e-11).unwrap();
    assert!((b.lambda1 - (a.lambda1 - 0.7)).abs() < 1e-9);
    let diff = a
        .phi1
        .values
        .iter()
        .zip(&b.phi1.values)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff <= 1e-9);
}

#[test]
fn sine_media_matches_golden_value() {
    let mu = Periodic::sine(1.0, 0.5);
    let l: Vec<f64> = [128, 256, 512]
        .iter()
        .map(|n| dense_eigenpair(&unit(0.5), &mu, *n).unwrap().lambda1)
        .collect();
    assert!((l[0] - l[1]).abs() < 1e-6 && (l[1] - l[2]).abs() < 1e-6);
    assert!((l[2] - GOLDEN_LAMBDA1).abs() < 1e-10, "{}", l[2]);
    let it = principal_eigenpair(&unit(0.5), &mu, 512, 1e-10).unwrap();
    assert!((it.lambda1 - GOLDEN_LAMBDA1).abs() < 1e-10);
}

#[test]
fn matrix_free_path_agrees() {
    let mu = Periodic::sine(1.0, 0.5);
    let p = principal_eigenpair(&unit(0.5), &mu, 2048, 1e-10).unwrap();
    assert!((p.lambda1 - GOLDEN_LAMBDA1).abs() < 1e-9);
    assert!(p.residual <= 1e-10 * (1.0 + p.lambda1.abs()));
}

#[test]
fn residual_certificate_and_positivity() {
    let k = StableKernel::isotropic(0.3, 1, Periodic::sine(1.0, 0.6)).unwrap();
    let mu = Periodic::Trig {
        mean: 0.8,
        cos: vec![0.4, 0.1],
        sin: vec![0.2],
    };
    let tol = 1e-10;
    let p = principal_eigenpair(&k, &mu, 128, tol).unwrap();
    let problem = CellProblem::from_periodic(&k, &mu, 128).unwrap();
    let r = problem.residual(p.lambda1, &p.phi1.values);
    assert!(r <= tol * (1.0 + p.lambda1.abs()));
    assert!(p.phi_min() > 0.0);
    let dense = dense_eigenpair(&k, &mu, 128).unwrap();
    assert!((dense.lambda1 - p.lambda1).abs() < 1e-9);
}

#[test]
fn invasion_condition() {
    let p = principal_eigenpair(&unit(0.5), &Periodic::constant(1.0), 32, 1e-12).unwrap();
    let h = check_h3(&p);
    assert!(h.holds && (h.margin - 1.0).abs() < 1e-10);
    assert!((predicted_exponent(&p, 1, 0.5).unwrap() - 0.5).abs() < 1e-10);

    let p = principal_eigenpair(&unit(0.5), &Periodic::constant(-1.0), 32, 1e-12).unwrap();
    assert!(!check_h3(&p).holds);
    assert!((p.lambda1 - 1.0).abs() < 1e-10);
    assert!(predicted_exponent(&p, 1, 0.5)
        .unwrap_err()
        .to_string()
        .contains("no invasion predicted"));

    let mu = Periodic::sine(0.0, 0.5);
    let it = principal_eigenpair(&unit(0.5), &mu, 128, 1e-10).unwrap();
    let dense = dense_eigenpair(&unit(0.5), &mu, 128).unwrap();
    assert_eq!(check_h3(&it).holds, check_h3(&dense).holds);
    assert!((it.lambda1 - dense.lambda1).abs() < 1e-9);
}

#[test]
fn kinked_media_converges_monotonically() {
    let mu = Periodic::AbsSine { mean: 1.0, amp: 0.8 };
    let l: Vec<f64> = [32, 64, 128, 256, 512]
        .iter()
        .map(|n| principal_eigenpair(&unit(0.5), &mu, *n, 1e-11).unwrap().lambda1)
        .collect();
    let gaps: Vec<f64> = l.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
}

#[test]
fn scaling_kernel_and_media_scales_the_eigenvalue() {
    let base = Periodic::cosine(1.0, 0.5);
    let k = StableKernel::isotropic(0.6, 1, base.clone()).unwrap();
    let zero = principal_eigenpair(&k, &Periodic::constant(0.0), 64, 1e-10).unwrap();
    let zero2 = principal_eigenpair(&k.scaled(2.0), &Periodic::constant(0.0), 64, 1e-10).unwrap();
    assert!((zero2.lambda1 - 2.0 * zero.lambda1).abs() < 1e-10);
    let mu = Periodic::sine(1.0, 0.7);
    let a = principal_eigenpair(&k, &mu, 64, 1e-11).unwrap();
    let b = principal_eigenpair(&k.scaled(2.0), &mu.scaled(2.0), 64, 1e-11).unwrap();
    assert!((b.lambda1 - 2.0 * a.lambda1).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]

    #[test]
    fn larger_media_lowers_the_eigenvalue(
        mean in 0.0f64..2.0, c in -0.5f64..0.5, s in -0.5f64..0.5,
        bump in 0.01f64..0.5, center in 0.0f64..1.0,
    ) {
        let k = StableKernel::isotropic(0.5, 1, Periodic::cosine(1.0, 0.3)).unwrap();
        let a = CellField::from_fn(1, 64, |x| mean + c * (2.0 * PI * x[0]).cos() + s * (2.0 * PI * x[0]).sin());
        let b = CellField::from_fn(1, 64, |x| {
            a.eval(x) + bump * (-(((x[0] - center + 0.5).rem_euclid(1.0) - 0.5) / 0.1).powi(2)).exp()
        });
        let la = principal_eigenpair_sampled(&k, &a, 1e-11).unwrap().lambda1;
        let lb = principal_eigenpair_sampled(&k, &b, 1e-11).unwrap().lambda1;
        prop_assert!(la >= lb);
    }
}
