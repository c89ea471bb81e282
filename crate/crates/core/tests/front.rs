use fkpp::domain::{CellField, Grid, Periodic, TailedField};
use fkpp::evolution::{Scheme, Snapshot, Trajectory};
use fkpp::front::{
    convergence_report, front_radius, hopf_cole, limit_profile, rescaled_sample, spreading_exponent, Probe,
};
use fkpp::operator::Backend;
use proptest::prelude::*;

fn synthetic(fields: Vec<(f64, TailedField)>) -> Trajectory {
    Trajectory {
        snapshots: fields.into_iter().map(|(t, field)| Snapshot { t, field }).collect(),
        scheme: Scheme::Imex,
        backend: Backend::Spectral { padding: 1 },
        dt: 0.1,
        steps: 0,
        clips: vec![],
        bounds: vec![],
        upper_bound: 2.0,
        bound_excess: 0.0,
    }
}

fn plus() -> CellField {
    CellField::from_periodic(1, 16, &Periodic::sine(1.0, 0.3))
}

fn on_box(g: Grid, f: impl Fn(f64) -> f64) -> TailedField {
    TailedField::from_fn(g, 0.5, |x| f(x[0])).unwrap()
}

#[test]
fn radius_of_simple_profiles() {
    let g = Grid::new(1, 32.0, 1024, 16).unwrap();
    let p = plus();
    let full = on_box(g, |x| p.eval(&[x]));
    assert_eq!(front_radius(&full, &p, 0.5).unwrap(), 32.0);
    assert_eq!(front_radius(&TailedField::constant(g, 0.0, 0.5), &p, 0.5).unwrap(), 0.0);
    let h = g.spacing();
    let step = on_box(g, |x| {
        let s = ((7.5 - x.abs()) / h).clamp(-0.5, 0.5) + 0.5;
        s * p.eval(&[x])
    });
    let r = front_radius(&step, &p, 0.5).unwrap();
    assert!((r - 7.5).abs() <= h, "{r}");
    let zero_plus = CellField::constant(1, 16, 0.0);
    assert!(front_radius(&step, &zero_plus, 0.5).is_err());
}

#[test]
fn exponential_fit_is_exact() {
    let s: Vec<(f64, f64)> = (0..40)
        .map(|i| (i as f64 * 0.25, (0.5 * i as f64 * 0.25).exp()))
        .collect();
    let fit = spreading_exponent(&s, (2.0, 9.0)).unwrap();
    assert!((fit.slope - 0.5).abs() < 1e-13);
    assert!(fit.stderr < 1e-12);
}

#[test]
fn rescaled_sampling() {
    let g = Grid::new(1, 32.0, 1024, 16).unwrap();
    let tr = synthetic(
        (0..=40)
            .map(|k| {
                let t = k as f64;
                (t, on_box(g, |x| (-(x * x) / (1.0 + t)).exp()))
            })
            .collect(),
    );
    let plain = rescaled_sample(&tr, 1.0, &[0.3], 2.0).unwrap().value;
    assert!((plain - tr.snapshots[2].field.eval(&[0.3])).abs() < 1e-15);
    // unit sphere is fixed
    let a = rescaled_sample(&tr, 0.2, &[1.0], 2.0).unwrap().value;
    assert!((a - tr.snapshots[10].field.eval(&[1.0])).abs() < 1e-15);
    // x = 1.1, eps = 0.25: |x|^4 and t / eps
    let b = rescaled_sample(&tr, 0.25, &[1.1], 5.0).unwrap().value;
    assert!((b - tr.snapshots[20].field.eval(&[1.1f64.powi(4)])).abs() < 1e-15);
    assert!(rescaled_sample(&tr, 0.25, &[1.1], 10.5).is_err());
    // composition with the Hopf-Cole transform at eps = 1
    let u = hopf_cole(rescaled_sample(&tr, 1.0, &[0.7], 3.5).unwrap().value, 1.0).unwrap();
    let direct = (0.5 * tr.snapshots[3].field.eval(&[0.7]) + 0.5 * tr.snapshots[4].field.eval(&[0.7])).ln();
    assert!((u - direct).abs() < 1e-14);
}

#[test]
fn report_on_steady_trajectory() {
    let g = Grid::new(1, 64.0, 2048, 16).unwrap();
    let p = plus();
    let f = on_box(g, |x| p.eval(&[x]));
    let tr = synthetic((0..=20).map(|k| (k as f64, f.clone())).collect());
    let a = vec![Probe::new(&[2.0], 0.5)];
    let b = vec![Probe::new(&[1.0], 1.0), Probe::new(&[0.5], 1.0)];
    let rep = convergence_report(&tr, &p, -1.0, &[0.5, 0.25], &a, &b).unwrap();
    for row in &rep.rows {
        assert_eq!(row.max_b, Some(0.0));
        let expect = p.eval(&[2f64.powf(1.0 / row.eps)]);
        assert!((row.max_a.unwrap() - expect).abs() < 1e-12);
    }
    // a probe that needs t / eps beyond the span is listed, not dropped
    let far = vec![Probe::new(&[1.0], 9.0)];
    let rep = convergence_report(&tr, &p, -1.0, &[0.5, 0.25], &a, &far).unwrap();
    assert_eq!(rep.skipped.len(), 1);
    assert_eq!(rep.skipped[0].eps, 0.25);
    // probes must respect the margin
    assert!(convergence_report(&tr, &p, -1.0, &[0.5], &[Probe::new(&[1.0], 1.0)], &b).is_err());
}

#[test]
fn limit_profile_vanishes_exactly_behind_the_interface() {
    let (l1, d, alpha) = (-1.3, 1, 0.4);
    let q = d as f64 + 2.0 * alpha;
    for i in 1..200 {
        let r = i as f64 * 0.05;
        for j in 1..50 {
            let t = j as f64 * 0.1;
            let u = limit_profile(&[r], t, l1, d, alpha);
            assert!(u <= 0.0);
            assert_eq!(u == 0.0, q * r.ln() <= l1.abs() * t);
        }
    }
    // continuity across the interface
    let t = 2.0;
    let r0 = (l1.abs() * t / q).exp();
    let left = limit_profile(&[r0 * (1.0 - 1e-9)], t, l1, d, alpha);
    let right = limit_profile(&[r0 * (1.0 + 1e-9)], t, l1, d, alpha);
    assert!((left - right).abs() < 1e-8);
}

proptest! {
    #[test]
    fn radius_is_monotone_in_the_level(c1 in 0.05f64..0.95, c2 in 0.05f64..0.95, w in 1.0f64..20.0) {
        let g = Grid::new(1, 32.0, 1024, 16).unwrap();
        let p = plus();
        let f = on_box(g, |x| p.eval(&[x]) / (1.0 + (x / w).powi(2)));
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        prop_assert!(front_radius(&f, &p, lo).unwrap() >= front_radius(&f, &p, hi).unwrap());
    }
}
