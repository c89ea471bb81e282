//! Measured constants of the two scaling lemmas for g(x) = 1/(1+|x|^{1+2α}).
//!
//! cargo run --release --example lemma_scaling -- [alpha]

use fkpp::domain::{Periodic, StableKernel};
use fkpp::verification::{lemma1_i, lemma1_ii, mid_gamma};

fn main() -> fkpp::Result<()> {
    let alpha: f64 = std::env::args().nth(1).map_or(0.5, |s| s.parse().expect("alpha"));
    let a_list = [1.0, 0.5, 0.2, 0.1, 0.05];
    for (name, beta) in [
        ("β ≡ 1", Periodic::constant(1.0)),
        ("β = 2+cos 2πx", Periodic::cosine(2.0, 1.0)),
    ] {
        let k = StableKernel::isotropic(alpha, 1, beta)?;
        let t = std::time::Instant::now();
        let r = lemma1_i(&k, &a_list)?;
        println!(
            "{name}: L g(a.)  slope {:.4} (>= {:.2})  spread {:.3}  probe change {:.2e}  pass {}  [{:.1?}]",
            r.slope.unwrap_or(f64::NAN),
            r.threshold,
            r.scaled_spread,
            r.max_probe_change,
            r.pass,
            t.elapsed()
        );
        for row in &r.rows {
            println!(
                "    a {:<5} C {:.10}  C/a^e {:.6}  at x = {}",
                row.a, row.c, row.c_scaled, row.argmax
            );
        }
        let gamma = mid_gamma(alpha);
        let chi = Periodic::cosine(2.0, 1.0);
        let t = std::time::Instant::now();
        let r = lemma1_ii(&k, &chi, gamma, &a_list)?;
        println!("{name}: K~(g(a.), χ) γ = {gamma}  slope {:.4} (>= {:.2})  spread {:.3}  probe change {:.2e}  pass {}  [{:.1?}]",
            r.slope.unwrap_or(f64::NAN), r.threshold, r.scaled_spread, r.max_probe_change, r.pass, t.elapsed());
        for row in &r.rows {
            println!(
                "    a {:<5} C {:.10}  C/a^e {:.6}  at x = {}",
                row.a, row.c, row.c_scaled, row.argmax
            );
        }
    }
    Ok(())
}
