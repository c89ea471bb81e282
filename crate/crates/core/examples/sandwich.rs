//! Algebraic tails at t = 1 and the sub-/super-solution sandwich for the
//! homogeneous logistic problem, plus the empirical eps_0.
//!
//! cargo run --release --example sandwich -- [T] [eps]

use fkpp::domain::{Grid, Periodic, ReactionModel, StableKernel};
use fkpp::eigen::{predicted_exponent, principal_eigenpair};
use fkpp::evolution::{evolve, raised_cosine};
use fkpp::verification::{
    check_sandwich, check_sandwich_unchecked, check_tails, empirical_eps0, envelope_for, halved_below_admissibility,
    initial_bracket, SandwichOptions,
};

fn main() -> fkpp::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let t_end = args.first().copied().unwrap_or(8.0);
    let eps = args.get(1).copied().unwrap_or(0.25);
    let alpha = 0.5;
    let kernel = StableKernel::constant(alpha, 1, 1.0)?;
    let media = Periodic::constant(1.0);
    let reaction = ReactionModel::logistic(media.clone());
    let grid = Grid::plan(
        1,
        16,
        4.0 * (predicted_exponent(&principal_eigenpair(&kernel, &media, 32, 1e-10)?, 1, alpha)? * t_end).exp(),
    )?;
    let pair = principal_eigenpair(&kernel, &media, 64, 1e-10)?;
    let n0 = raised_cosine(grid, alpha, &[0.0], 2.0, 1.0)?;
    let traj = evolve(&kernel, &reaction, &n0, t_end, 0.01, 0.25)?;
    println!("L {}  n_box {}  snapshots {}", grid.l, grid.n_box, traj.snapshots.len());

    let at_one = &traj.at(1.0).field;
    let tails = check_tails(at_one, 1, alpha)?;
    println!(
        "tails at t=1: slope {:.4} (expected {})  c_m {:.4e}  c_M {:.4e}  pass {}",
        tails.slope, tails.expected, tails.c_m_hat, tails.c_big_m_hat, tails.pass
    );
    let bracket = initial_bracket(at_one);
    println!(
        "initial bracket over the box: c_m {:.4e}  c_M {:.4e}",
        bracket.0, bracket.1
    );

    let env = envelope_for(&pair, alpha, 1.0, 1.0, bracket, 1.25, eps)?;
    println!(
        "C_m {:.4e}  C_M {:.4}  delta {:.4}  eps {eps}",
        env.c_m, env.c_big_m, env.delta
    );
    let opts = SandwichOptions::default();
    let rep = check_sandwich(&traj, &env, &opts)?;
    println!(
        "sandwich: {} probes, {} lower / {} upper violations, worst {:.3e} / {:.3e}",
        rep.probes, rep.lower_violations, rep.upper_violations, rep.worst_lower, rep.worst_upper
    );
    let control = halved_below_admissibility(&env);
    let rep = check_sandwich_unchecked(&traj, &control, &opts)?;
    println!(
        "control with C_M = {:.4}: {} upper violations, first {:?}",
        control.c_big_m, rep.upper_violations, rep.first
    );
    let e0 = empirical_eps0(&traj, &env, &opts, (0.01, 0.5))?;
    println!(
        "empirical eps_0 {:?} (saturated {}, {} checks)",
        e0.eps0, e0.saturated, e0.evaluations
    );
    Ok(())
}
