//! Spreading exponent of the invasion front for homogeneous or periodic
//! media, against the prediction `|lambda1| / (d + 2 alpha)`.
//!
//! cargo run --release --example front_exponent -- [media_amp] [T] [dt]

use fkpp::domain::{Grid, Periodic, ReactionModel, StableKernel};
use fkpp::eigen::{predicted_exponent, principal_eigenpair};
use fkpp::evolution::{evolve, raised_cosine, steady_state};
use fkpp::front::{front_series, spreading_exponent};

fn main() -> fkpp::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let amp = args.first().copied().unwrap_or(0.0);
    let t_end = args.get(1).copied().unwrap_or(14.0);
    let dt = args.get(2).copied().unwrap_or(0.01);

    let alpha = 0.5;
    let kernel = StableKernel::constant(alpha, 1, 1.0)?;
    let media = Periodic::sine(1.0, amp);
    let reaction = ReactionModel::logistic(media.clone());
    let pair = principal_eigenpair(&kernel, &media, 512, 1e-10)?;
    let rate = predicted_exponent(&pair, 1, alpha)?;
    let plus = steady_state(&kernel, &reaction, 64, 1e-10)?;

    let grid = Grid::plan(1, 16, 4.0 * (rate * t_end).exp())?;
    println!(
        "lambda1 {:.10}  predicted {rate:.6}  L {}  n_box {}",
        pair.lambda1, grid.l, grid.n_box
    );
    let n0 = raised_cosine(grid, alpha, &[0.0], 2.0, 1.0)?;
    let start = std::time::Instant::now();
    let traj = evolve(&kernel, &reaction, &n0, t_end, dt, 0.25)?;
    println!("evolved in {:.1?}, {} clip events", start.elapsed(), traj.clips.len());

    let levels = [0.25, 0.5, 0.75];
    let series = front_series(&traj, &plus.n_plus, &levels)?;
    for (t, r) in series.iter().filter(|(t, _)| t.fract() == 0.0) {
        println!("t {t:5.1}  radii {:10.2} {:10.2} {:10.2}", r[0], r[1], r[2]);
    }
    let window = (3.0 * t_end / 7.0, t_end);
    for (j, c) in levels.iter().enumerate() {
        let s: Vec<(f64, f64)> = series.iter().map(|(t, r)| (*t, r[j])).collect();
        let fit = spreading_exponent(&s, window)?;
        println!(
            "level {c}: slope {:.4} ± {:.4}  r2 {:.5}",
            fit.slope, fit.stderr, fit.r2
        );
    }
    Ok(())
}
