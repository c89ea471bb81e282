use std::f64::consts::PI;

use fkpp::domain::{CellField, Grid, Periodic, StableKernel, TailedField};
use fkpp::operator::{
    apply_bilinear, apply_operator, apply_rescaled_operator, Extended, OperatorPlan, PeriodicOnBox, Product,
};
use proptest::prelude::*;

fn unit_kernel(alpha: f64) -> StableKernel {
    StableKernel::constant(alpha, 1, 1.0).unwrap()
}

fn sup_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Composite Simpson on `[a, b]` with `n` (even) intervals.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `L exp(-x^2)` with unit kernel at alpha = 1/2, from the Fourier side.
fn gaussian_oracle(x: f64) -> f64 {
    simpson(0.0, 40.0, 80_000, |k| {
        PI * k * PI.sqrt() * (-k * k / 4.0).exp() * (k * x).cos()
    }) / PI
}

#[test]
fn constants_are_annihilated() {
    let g = Grid::new(1, 20.0, 512, 64).unwrap();
    for alpha in [0.25, 0.5, 0.75] {
        let k = StableKernel::isotropic(alpha, 1, Periodic::sine(1.0, 0.5)).unwrap();
        let one = TailedField::constant(g, 3.0, alpha);
        let out = apply_operator(&OperatorPlan::quadrature(&k, g).unwrap(), &one).unwrap();
        assert!(out.sup_abs() <= 1e-10 * 3.0, "alpha {alpha}: {}", out.sup_abs());
        let out = apply_operator(&OperatorPlan::spectral(&unit_kernel(alpha), g, 2).unwrap(), &one).unwrap();
        assert!(out.sup_abs() <= 1e-10 * 3.0);
    }
    let g2 = Grid::new(2, 8.0, 64, 4).unwrap();
    let k2 = StableKernel::constant(0.5, 2, 1.0).unwrap();
    let out = apply_operator(
        &OperatorPlan::spectral(&k2, g2, 1).unwrap(),
        &TailedField::constant(g2, 1.0, 0.5),
    )
    .unwrap();
    assert!(out.sup_abs() <= 1e-10);
}

#[test]
fn spectral_gaussian_matches_fourier_oracle() {
    let g = Grid::new(1, 20.0, 1024, 128).unwrap();
    let f = TailedField::from_fn(g, 0.5, |x| (-x[0] * x[0]).exp()).unwrap();
    let out = apply_operator(&OperatorPlan::spectral(&unit_kernel(0.5), g, 64).unwrap(), &f).unwrap();
    // periodic images of the x^{-2} tail of L f: mass * 2 zeta(2) / period^2
    let wrap = PI.sqrt() * PI * PI / 3.0 / (64.0 * 40.0f64).powi(2);
    for x in [0.0, 0.46875, 1.5625] {
        let exact = gaussian_oracle(x);
        let got = out.eval(&[x]);
        assert!((got - exact).abs() < 1.2 * wrap + 1e-9, "x={x}: {got} vs {exact}");
    }
}

#[test]
fn backends_agree_with_the_expected_order() {
    let mut errs = Vec::new();
    for n in [512, 1024] {
        let g = Grid::new(1, 20.0, n, n / 8).unwrap();
        let f = TailedField::from_fn(g, 0.5, |x| (-x[0] * x[0]).exp()).unwrap();
        let k = unit_kernel(0.5);
        let q = apply_operator(&OperatorPlan::quadrature(&k, g).unwrap(), &f).unwrap();
        let s = apply_operator(&OperatorPlan::spectral(&k, g, 64).unwrap(), &f).unwrap();
        errs.push(sup_rel(&q.values, &s.values));
    }
    assert!(errs[0] <= 1e-3, "{errs:?}");
    assert!(errs[1] <= 1e-4, "{errs:?}");
    // near field is O(h^{4-2 alpha}) for smooth data
    assert!(errs[0] / errs[1] > 4.0, "{errs:?}");
}

#[test]
fn algebraic_profile_ratio_is_bounded_by_pi() {
    // L (1+x^2)^{-1} = pi (1-x^2)/(1+x^2)^2 at alpha = 1/2, so sup |Lg|/g = pi.
    let g = Grid::new(1, 256.0, 8192, 16).unwrap();
    let f = TailedField::from_fn(g, 0.5, |x| 1.0 / (1.0 + x[0] * x[0])).unwrap();
    let out = apply_operator(&OperatorPlan::quadrature(&unit_kernel(0.5), g).unwrap(), &f).unwrap();
    let golden = PI;
    let mut ratio_sup: f64 = 0.0;
    for x in [0.0, 1.0, 10.0, 100.0] {
        let exact = PI * (1.0 - x * x) / (1.0 + x * x).powi(2);
        let got = out.eval(&[x]);
        assert!(
            (got - exact).abs() < 1e-4 * (1.0 + x * x).recip().max(1e-3),
            "x={x}: {got} vs {exact}"
        );
        ratio_sup = ratio_sup.max(got.abs() * (1.0 + x * x));
    }
    assert!(ratio_sup <= golden * (1.0 + 1e-4));
    assert!(ratio_sup >= golden * (1.0 - 1e-3));
}

#[test]
fn even_input_gives_even_output() {
    let g = Grid::new(1, 20.0, 512, 64).unwrap();
    let f = TailedField::from_fn(g, 0.5, |x| (-x[0] * x[0]).exp() * (1.0 + 0.3 * x[0] * x[0])).unwrap();
    let out = apply_operator(&OperatorPlan::quadrature(&unit_kernel(0.5), g).unwrap(), &f).unwrap();
    let n = g.n_box;
    let scale = out.sup_abs();
    for i in 1..n {
        assert!((out.values[i] - out.values[n - i]).abs() <= 1e-10 * scale);
    }
}

#[test]
fn bilinear_form_vanishes_on_constants() {
    let g = Grid::new(1, 10.0, 256, 64).unwrap();
    let plan = OperatorPlan::quadrature(&unit_kernel(0.5), g).unwrap();
    let f = TailedField::from_fn(g, 0.5, |x| (-x[0] * x[0]).exp()).unwrap();
    let per = CellField::from_periodic(1, 64, &Periodic::cosine(2.0, 1.0));
    let zero = apply_bilinear(&plan, &f, &CellField::constant(1, 64, 5.0)).unwrap();
    assert!(zero.sup_abs() < 1e-14);
    let zero = apply_bilinear(&plan, &TailedField::constant(g, 2.0, 0.5), &per).unwrap();
    assert!(zero.sup_abs() < 1e-14);
}

fn product_rule_residual(plan: &OperatorPlan, f: &TailedField, cell: &CellField) -> (f64, f64) {
    let g = *plan.grid();
    let per = PeriodicOnBox::new(g, cell).unwrap();
    let lfg = plan.apply_extended(&Product(f, &per)).unwrap();
    let lf = plan.apply_extended(f).unwrap();
    let lg = plan.apply_extended(&per).unwrap();
    let k = plan.bilinear_extended(f, &per).unwrap();
    let mut res: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..g.len() {
        let (fi, gi) = (f.node(i), per.node(i));
        res = res.max((lfg[i] - fi * lg[i] - gi * lf[i] + k[i]).abs());
        scale = scale.max(lfg[i].abs()).max((fi * lg[i]).abs()).max((gi * lf[i]).abs());
    }
    (res, scale)
}

#[test]
fn product_rule_holds() {
    let g = Grid::new(1, 20.0, 1024, 128).unwrap();
    let plan = OperatorPlan::quadrature(&unit_kernel(0.5), g).unwrap();
    let f = TailedField::from_fn(g, 0.5, |x| (-x[0] * x[0]).exp()).unwrap();
    let cell = CellField::from_periodic(1, 128, &Periodic::cosine(2.0, 1.0));
    let (res, scale) = product_rule_residual(&plan, &f, &cell);
    assert!(res <= 1e-6 * scale, "{res} vs {scale}");
}

#[test]
fn rescaled_operator_is_a_pullback() {
    let g = Grid::new(1, 20.0, 512, 64).unwrap();
    let plan = OperatorPlan::quadrature(&unit_kernel(0.5), g).unwrap();
    let f = TailedField::from_fn(g, 0.5, |x| (-x[0] * x[0]).exp()).unwrap();
    let lf = apply_operator(&plan, &f).unwrap();
    let a = apply_rescaled_operator(&plan, &f, 1.0, &[0.7]).unwrap();
    assert!((a - lf.eval(&[0.7])).abs() < 1e-15);
    let b = apply_rescaled_operator(&plan, &f, 0.5, &[-1.2]).unwrap();
    assert!((b - lf.eval(&[-1.44])).abs() < 1e-15);
    let c = apply_rescaled_operator(&plan, &TailedField::constant(g, 1.0, 0.5), 0.3, &[1.1]).unwrap();
    assert!(c.abs() < 1e-12);
    let err = apply_rescaled_operator(&plan, &f, 0.2, &[3.0]).unwrap_err();
    assert!(err.to_string().contains("larger L"));
}

#[test]
fn heterogeneous_kernel_rejects_spectral_backend() {
    let g = Grid::new(1, 8.0, 64, 4).unwrap();
    let k = StableKernel::isotropic(0.5, 1, Periodic::sine(1.0, 0.5)).unwrap();
    assert!(OperatorPlan::spectral(&k, g, 1).is_err());
    assert!(OperatorPlan::quadrature(
        &StableKernel::constant(0.5, 2, 1.0).unwrap(),
        Grid::new(2, 8.0, 64, 4).unwrap()
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn product_rule_on_random_pairs(
        amp in 0.2f64..3.0, center in -2.0f64..2.0, width in 0.5f64..3.0,
        mean in 1.5f64..4.0, c1 in -1.0f64..1.0, s1 in -1.0f64..1.0,
        alpha in 0.2f64..0.8,
    ) {
        let g = Grid::new(1, 16.0, 256, 8).unwrap();
        let kernel = StableKernel::isotropic(alpha, 1, Periodic::cosine(1.0, 0.3)).unwrap();
        let plan = OperatorPlan::quadrature(&kernel, g).unwrap();
        let f = TailedField::from_fn(g, alpha, |x| amp * (-(x[0] - center).powi(2) / width).exp()).unwrap();
        let p = Periodic::Trig { mean, cos: vec![c1], sin: vec![s1] };
        let cell = CellField::from_periodic(1, 8, &p);
        let (res, scale) = product_rule_residual(&plan, &f, &cell);
        prop_assert!(res <= 1e-6 * scale, "{} vs {}", res, scale);
    }

    #[test]
    fn operator_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, shift in -1.0f64..1.0) {
        let g = Grid::new(1, 16.0, 256, 8).unwrap();
        let plan = OperatorPlan::quadrature(&unit_kernel(0.4), g).unwrap();
        let f = TailedField::from_fn(g, 0.4, |x| (-(x[0] - shift).powi(2)).exp()).unwrap();
        let h = TailedField::from_fn(g, 0.4, |x| 1.0 / (1.0 + x[0].abs().powf(1.8))).unwrap();
        let lf = apply_operator(&plan, &f).unwrap();
        let lh = apply_operator(&plan, &h).unwrap();
        let combo = apply_operator(&plan, &f.combine(a, &h, b).unwrap()).unwrap();
        let expect: Vec<f64> = lf.values.iter().zip(&lh.values).map(|(x, y)| a * x + b * y).collect();
        let scale = lf.sup_abs() * a.abs() + lh.sup_abs() * b.abs() + 1e-300;
        let err = combo.values.iter().zip(&expect).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(err <= 1e-12 * scale);
    }
}
