use std::f64::consts::PI;

use fkpp::domain::{Envelope, Grid, Periodic, ReactionModel, StableKernel, TailedField};
use fkpp::eigen::principal_eigenpair;
use fkpp::evolution::{evolve, raised_cosine, Trajectory};
use fkpp::verification::{
    build_envelopes, check_sandwich, check_sandwich_unchecked, check_tails, envelope_for, halved_below_admissibility,
    heat_kernel_bounds, heat_kernel_bounds_sigma, initial_bracket, lemma1_i, lemma1_i_ratio, lemma1_ii, lemma1_probes,
    SandwichOptions,
};
use fkpp::Error;
use proptest::prelude::*;

fn unit(alpha: f64) -> StableKernel {
    StableKernel::constant(alpha, 1, 1.0).unwrap()
}

fn tail_grid() -> Grid {
    Grid::new(1, 256.0, 8192, 16).unwrap()
}

#[test]
fn tails_of_an_algebraic_profile() {
    let f = TailedField::from_fn(tail_grid(), 0.5, |x| 3.0 / (1.0 + x[0] * x[0])).unwrap();
    let r = check_tails(&f, 1, 0.5).unwrap();
    assert!(r.pass, "{r:?}");
    assert!((r.slope + 2.0).abs() < 0.01, "{}", r.slope);
    assert!((r.c_m_hat - 3.0).abs() < 1e-12 && (r.c_big_m_hat - 3.0).abs() < 1e-12);
    assert_eq!(r.window, (6.4, 64.0));
}

#[test]
fn gaussian_tails_are_rejected() {
    let f = TailedField::from_fn(tail_grid(), 0.5, |x| (-x[0] * x[0] / 800.0).exp()).unwrap();
    let r = check_tails(&f, 1, 0.5).unwrap();
    assert!(!r.pass, "{r:?}");
}

#[test]
fn compact_support_reports_a_small_box() {
    let f = raised_cosine(tail_grid(), 0.5, &[0.0], 2.0, 1.0).unwrap();
    let e = check_tails(&f, 1, 0.5).unwrap_err();
    assert!(e.to_string().contains("box too small"), "{e}");
}

/// `L g(0) = 2 int_0^inf ds / (1 + s^q) = 2 (pi / q) / sin(pi / q)` for the
/// unit kernel, `g = 1 / (1 + |x|^q)`, `q = 1 + 2 alpha`.
#[test]
fn lemma_constant_at_the_origin_matches_closed_form() {
    for alpha in [0.25, 0.5, 0.75] {
        let q = 1.0 + 2.0 * alpha;
        let exact = 2.0 * PI / (q * (PI / q).sin());
        let got = lemma1_i_ratio(&unit(alpha), 1.0, 0.0).unwrap();
        assert!((got - exact).abs() < 1e-7 * exact, "alpha {alpha}: {got} vs {exact}");
    }
}

#[test]
fn lemma_i_scales_like_a_to_the_two_alpha() {
    let r = lemma1_i(&unit(0.5), &[1.0, 0.3, 0.1]).unwrap();
    assert!(r.pass, "{r:?}");
    assert!((r.rows[0].c - PI).abs() < 1e-6, "C(1) = {}", r.rows[0].c);
    assert!(r.rows[2].c / r.rows[0].c <= 0.15);
    assert!(r.slope.unwrap() >= 0.9);
}

#[test]
fn lemma_i_is_linear_in_beta() {
    let one = lemma1_i(&unit(0.5), &[1.0, 0.5]).unwrap();
    let two = lemma1_i(&StableKernel::constant(0.5, 1, 2.0).unwrap(), &[1.0, 0.5]).unwrap();
    for (a, b) in one.rows.iter().zip(&two.rows) {
        assert!((b.c - 2.0 * a.c).abs() < 1e-12 * a.c);
    }
}

#[test]
fn lemma_ii_vanishes_for_constant_chi() {
    let r = lemma1_ii(&unit(0.5), &Periodic::constant(2.0), 0.5, &[1.0, 0.5]).unwrap();
    assert!(r.rows.iter().all(|row| row.c == 0.0));
    assert!(r.slope.is_none() && r.pass);
}

#[test]
fn lemma_ii_rejects_gamma_outside_window() {
    let e = lemma1_ii(&unit(0.75), &Periodic::cosine(2.0, 1.0), 0.4, &[1.0, 0.5]).unwrap_err();
    assert!(matches!(e, Error::Invalid { .. }));
    assert!(e.to_string().contains("(0.5, 1)"), "{e}");
}

#[test]
fn lemma_ii_rate() {
    let r = lemma1_ii(&unit(0.5), &Periodic::cosine(2.0, 1.0), 0.25, &[1.0, 0.3, 0.1]).unwrap();
    assert!(r.slope.unwrap() >= 0.65, "{r:?}");
    assert!(r.pass);
}

#[test]
fn lemma_rejects_heterogeneous_kernels_in_two_dimensions() {
    let k = StableKernel::constant(0.5, 2, 1.0).unwrap();
    assert!(lemma1_i(&k, &[1.0, 0.5]).is_err());
}

#[test]
fn doubled_probe_set_contains_the_base_set() {
    let base = lemma1_probes(20, 12);
    let doubled = lemma1_probes(40, 24);
    for x in &base {
        assert!(
            doubled.iter().any(|y| (x - y).abs() <= 1e-12 * x.abs().max(1.0)),
            "{x} missing"
        );
    }
    assert!(base.contains(&0.0));
    assert!(base.iter().all(|x| base.contains(&-x)));
}

fn homogeneous_envelope(eps: f64) -> Envelope {
    let pair = principal_eigenpair(&unit(0.5), &Periodic::constant(1.0), 32, 1e-10).unwrap();
    let delta = Envelope::delta_max(&pair, 1.0, 1.0, 0.5, 2.0);
    Envelope::new(pair, 0.5, 1.0, 1.0, 0.5, 2.0, delta, eps).unwrap()
}

#[test]
fn envelope_values_at_unit_radius() {
    let env = homogeneous_envelope(0.25);
    let table = build_envelopes(&env, &[0.0], &[vec![1.0]]).unwrap();
    let e = (-env.delta / env.epsilon).exp();
    let upper = env.c_big_m / (1.0 + e);
    let lower = env.c_m * e / (1.0 + e);
    assert!((table.f_big_m[0][0] - upper).abs() < 1e-12);
    assert!((table.f_m[0][0] - lower).abs() < 1e-12);
}

#[test]
fn envelope_tail_has_rescaled_power() {
    let env = homogeneous_envelope(0.25);
    let (r1, r2) = (50.0, 100.0);
    let table = build_envelopes(&env, &[0.5], &[vec![r1], vec![r2]]).unwrap();
    let slope = (table.log_f_big_m[0][1] - table.log_f_big_m[0][0]) / (r2 / r1).ln();
    assert!((slope + 2.0 / 0.25).abs() < 1e-9, "{slope}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelopes_are_ordered_and_monotone(t in 0.0f64..3.0, r in 0.01f64..50.0, eps in 0.05f64..0.3) {
        let env = homogeneous_envelope(eps.min(0.9 * homogeneous_envelope(0.05).delta));
        let table = build_envelopes(&env, &[t, t + 0.5], &[vec![r], vec![1.5 * r]]).unwrap();
        for row in 0..2 {
            for j in 0..2 {
                prop_assert!(table.log_f_m[row][j] <= table.log_f_big_m[row][j]);
            }
            prop_assert!(table.log_f_big_m[row][1] <= table.log_f_big_m[row][0]);
        }
        prop_assert!(table.log_f_big_m[1][0] >= table.log_f_big_m[0][0]);
    }
}

fn homogeneous_run() -> Trajectory {
    let k = unit(0.5);
    let grid = Grid::new(1, 64.0, 2048, 16).unwrap();
    let n0 = raised_cosine(grid, 0.5, &[0.0], 2.0, 1.0).unwrap();
    evolve(
        &k,
        &ReactionModel::logistic(Periodic::constant(1.0)),
        &n0,
        4.0,
        0.01,
        0.25,
    )
    .unwrap()
}

#[test]
fn sandwich_holds_and_the_control_fails() {
    let traj = homogeneous_run();
    let pair = principal_eigenpair(&unit(0.5), &Periodic::constant(1.0), 64, 1e-10).unwrap();
    let bracket = initial_bracket(&traj.at(1.0).field);
    let env = envelope_for(&pair, 0.5, 1.0, 1.0, bracket, 1.25, 0.25).unwrap();
    let opts = SandwichOptions::default();
    let rep = check_sandwich(&traj, &env, &opts).unwrap();
    assert!(rep.probes >= 10_000);
    assert!(rep.pass, "{rep:?}");

    let control = halved_below_admissibility(&env);
    assert!(check_sandwich(&traj, &control, &opts).is_err());
    let rep = check_sandwich_unchecked(&traj, &control, &opts).unwrap();
    assert!(rep.upper_violations > 0 && !rep.pass);
    assert!(!rep.first.unwrap().lower);
}

#[test]
fn sandwich_rejects_mismatched_inputs() {
    let traj = homogeneous_run();
    let pair = principal_eigenpair(&unit(0.5), &Periodic::constant(1.0), 40, 1e-10).unwrap();
    let bracket = initial_bracket(&traj.at(1.0).field);
    let env = envelope_for(&pair, 0.5, 1.0, 1.0, bracket, 1.25, 0.25).unwrap();
    let e = check_sandwich(&traj, &env, &SandwichOptions::default()).unwrap_err();
    assert!(e.to_string().contains("does not refine"), "{e}");

    let pair = principal_eigenpair(&unit(0.5), &Periodic::constant(1.0), 64, 1e-10).unwrap();
    let env = envelope_for(&pair, 0.5, 1.0, 1.0, bracket, 1.25, 0.25).unwrap();
    let late = SandwichOptions {
        t0: 10.0,
        ..SandwichOptions::default()
    };
    assert!(matches!(check_sandwich(&traj, &env, &late), Err(Error::OutOfDomain(_))));
}

fn heat_grid() -> Grid {
    Grid::new(1, 512.0, 16384, 16).unwrap()
}

const HEAT_TIMES: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
const HEAT_RADII: [f64; 9] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

/// At alpha = 1/2 the kernel is `t / (pi^2 t^2 + x^2)`, so the two-sided
/// constant against `min(1/t, t/x^2)` is `pi^2 + 1`, attained at `|x| = t`.
#[test]
fn heat_kernel_constant_matches_poisson_kernel() {
    let r = heat_kernel_bounds(&unit(0.5), heat_grid(), &HEAT_TIMES, &HEAT_RADII).unwrap();
    let exact = PI * PI + 1.0;
    assert!((r.c_hat - exact).abs() < 0.02 * exact, "{} vs {exact}", r.c_hat);
    assert!((r.sup_slope + 1.0).abs() < 0.05);
    assert!(r.mass_error < 1e-10);
    assert!(r.stable && r.pass);
}

#[test]
fn heat_kernel_needs_constant_beta_and_resolved_times() {
    let k = StableKernel::isotropic(0.5, 1, Periodic::cosine(2.0, 1.0)).unwrap();
    assert!(matches!(
        heat_kernel_bounds(&k, heat_grid(), &HEAT_TIMES, &HEAT_RADII),
        Err(Error::Unsupported(_))
    ));
    let e = heat_kernel_bounds(&unit(0.5), heat_grid(), &[0.1, 1.0], &HEAT_RADII).unwrap_err();
    assert!(e.to_string().contains("under-resolved"), "{e}");
    let h = heat_grid().spacing();
    assert!(heat_kernel_bounds_sigma(&unit(0.5), heat_grid(), 3.0 * h, &HEAT_TIMES, &HEAT_RADII).is_err());
}
