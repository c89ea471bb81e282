//! A scenario file run through the same entry point as the command line:
//! eigenpair, simulation and front analysis into a temporary directory.
//!
//! cargo run --release --example scenario -- [out_dir]

use std::path::PathBuf;

use fkpp::scenario::{run_scenario, Command, Overrides};

const SCENARIO: &str = r#"{
  "dimension": 1,
  "alpha": 0.5,
  "kernel": {"beta": {"family": "constant", "value": 1.0}},
  "media": {"family": "sine", "mean": 1.0, "amp": 0.5},
  "reaction": {"family": "logistic"},
  "grid": {"L": "auto", "n_box": "auto", "n_cell": 16},
  "run": {"T": 10.0, "dt": 0.01, "snap_every": 0.25},
  "front": {"window": [5.0, 10.0]}
}"#;

fn main() -> fkpp::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("fkpp-scenario"), PathBuf::from);
    let config = out.join("scenario.json");
    std::fs::create_dir_all(&out)?;
    std::fs::write(&config, SCENARIO)?;
    for command in [Command::Eig, Command::Front] {
        let outcome = run_scenario(&config, command, &out, Overrides::default())?;
        for line in outcome.lines {
            println!("{}: {line}", command.name());
        }
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
