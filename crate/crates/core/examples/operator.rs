//! The nonlocal operator on `1/(1+x^2)`: quadrature against the closed form
//! `pi (1 - x^2) / (1 + x^2)^2` at `alpha = 1/2`, and agreement of the
//! quadrature and spectral backends on a Gaussian.
//!
//! cargo run --release --example operator

use std::f64::consts::PI;

use fkpp::domain::{Grid, StableKernel, TailedField};
use fkpp::operator::{apply_operator, OperatorPlan};

fn main() -> fkpp::Result<()> {
    let kernel = StableKernel::constant(0.5, 1, 1.0)?;
    let grid = Grid::new(1, 256.0, 8192, 16)?;
    let f = TailedField::from_fn(grid, 0.5, |x| 1.0 / (1.0 + x[0] * x[0]))?;
    let out = apply_operator(&OperatorPlan::quadrature(&kernel, grid)?, &f)?;
    for x in [0.0, 0.5, 1.0, 3.0, 10.0, 100.0] {
        let exact = PI * (1.0 - x * x) / (1.0 + x * x).powi(2);
        println!("x {x:6.1}: computed {:+.10e}  exact {exact:+.10e}", out.eval(&[x]));
    }

    for n in [256, 512, 1024] {
        let g = Grid::new(1, 20.0, n, n / 8)?;
        let f = TailedField::from_fn(g, 0.5, |x| (-x[0] * x[0]).exp())?;
        let q = apply_operator(&OperatorPlan::quadrature(&kernel, g)?, &f)?;
        let s = apply_operator(&OperatorPlan::spectral(&kernel, g, 64)?, &f)?;
        let err = q
            .values
            .iter()
            .zip(&s.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / s.sup_abs();
        println!("n_box {n:5}: quadrature vs spectral sup-relative {err:.2e}");
    }
    Ok(())
}
