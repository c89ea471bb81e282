//! Principal periodic eigenpair of `L - mu` for a sine media, its
//! refinement drift and the predicted spreading exponent.
//!
//! cargo run --release --example eigenpair -- [alpha] [amp]

use fkpp::domain::{Periodic, StableKernel};
use fkpp::eigen::{check_h3, dense_eigenpair, predicted_exponent, principal_eigenpair};

fn main() -> fkpp::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let alpha = args.first().copied().unwrap_or(0.5);
    let amp = args.get(1).copied().unwrap_or(0.5);
    let kernel = StableKernel::constant(alpha, 1, 1.0)?;
    let media = Periodic::sine(1.0, amp);

    for n in [64, 128, 256, 512] {
        let dense = dense_eigenpair(&kernel, &media, n)?;
        let inverse = principal_eigenpair(&kernel, &media, n, 1e-10)?;
        println!(
            "cell_n {n:4}: dense {:.13}  inverse iteration {:.13}  residual {:.1e}",
            dense.lambda1, inverse.lambda1, inverse.residual
        );
    }
    let pair = principal_eigenpair(&kernel, &media, 512, 1e-10)?;
    let h3 = check_h3(&pair);
    println!(
        "phi1 in [{:.6}, {:.6}], invasion {} (margin {:.6})",
        pair.phi_min(),
        pair.phi_max(),
        h3.holds,
        h3.margin
    );
    if h3.holds {
        println!("predicted exponent {:.6}", predicted_exponent(&pair, 1, alpha)?);
    }
    Ok(())
}
