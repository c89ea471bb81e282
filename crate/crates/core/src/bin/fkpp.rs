use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fkpp::scenario::{run_scenario, Command, Overrides, VerifySelection};

/// Fractional Fisher-KPP laboratory.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    config: PathBuf,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Override the time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the final time.
    #[arg(long = "T")]
    t_end: Option<f64>,
}

#[derive(Subcommand)]
enum Sub {
    /// Principal periodic eigenpair.
    Eig(Common),
    /// Positive periodic steady state.
    Steady(Common),
    /// Time evolution with trajectory and snapshots.
    Simulate(Common),
    /// Front radii and spreading exponent.
    Front(Common),
    /// Numerical checks; all of them when no flag is given.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tails: bool,
        #[arg(long)]
        lemma1: bool,
        #[arg(long)]
        sandwich: bool,
        #[arg(long)]
        heatkernel: bool,
    },
}

fn threads() -> Result<(), String> {
    let Ok(v) = std::env::var("FKPP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("FKPP_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let (common, command) = match cli.command {
        Sub::Eig(c) => (c, Command::Eig),
        Sub::Steady(c) => (c, Command::Steady),
        Sub::Simulate(c) => (c, Command::Simulate),
        Sub::Front(c) => (c, Command::Front),
        Sub::Verify {
            common,
            tails,
            lemma1,
            sandwich,
            heatkernel,
        } => (
            common,
            Command::Verify(VerifySelection {
                tails,
                lemma1,
                sandwich,
                heatkernel,
            }),
        ),
    };
    let overrides = Overrides {
        dt: common.dt,
        t_end: common.t_end,
    };
    match run_scenario(&common.config, command, &common.out, overrides) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            println!("wrote {} to {}", outcome.artifacts.join(", "), common.out.display());
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: verification failed");
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
