//! Positive periodic steady state of the weighted logistic reaction
//! `mu n - omega n^2` with `omega = 2 + sin(2 pi x)`.
//!
//! cargo run --release --example steady_state

use fkpp::domain::{Periodic, ReactionModel, StableKernel};
use fkpp::evolution::{steady_state, steady_state_from};

fn main() -> fkpp::Result<()> {
    let kernel = StableKernel::constant(0.5, 1, 1.0)?;
    let reaction = ReactionModel::weighted_logistic(Periodic::constant(1.0), Periodic::sine(2.0, 1.0))?;
    let top = steady_state(&kernel, &reaction, 64, 1e-10)?;
    let low = steady_state_from(&kernel, &reaction, 64, 1e-10, 0.1)?;
    println!("residual {:.1e} after {} iterations", top.residual, top.iterations);
    for x in [0.0, 0.25, 0.5, 0.75] {
        println!("n_plus({x:4}) = {:.12}", top.n_plus.eval(&[x]));
    }
    let gap = top
        .n_plus
        .values
        .iter()
        .zip(&low.n_plus.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("starting from 0.1 instead: sup difference {gap:.1e}");
    Ok(())
}
