//! Command-line front end for noise-space posterior sampling.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use latentwalk_cli::error::CliError;
use latentwalk_cli::verify::{run_suite, Suite};
use latentwalk_cli::{config, metrics_cmd, runner};

#[derive(Parser)]
#[command(
    name = "latentwalk",
    version,
    about = "Posterior sampling via Langevin dynamics in the noise space of a generative map"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sampling experiment from a TOML config.
    Sample {
        /// Path to the experiment config.
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite (pullback, adjoint, equilibrium, theorem,
    /// dpi, nfe, or all).
    Verify {
        /// Suite name.
        suite: String,
    },
    /// Compute metrics over a samples CSV.
    Metrics {
        /// Path to a samples CSV written by `sample`.
        samples: PathBuf,
        /// Optional reference vector file (whitespace/comma separated).
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Print the amortized NFE-per-sample curve eta*(K+N)/N.
    Nfe {
        /// Function evaluations per forward pass of the map.
        #[arg(long)]
        eta: u64,
        /// Warm-start steps K.
        #[arg(long)]
        warm: u64,
        /// Chain lengths N to evaluate.
        #[arg(long, num_args = 1.., required = true)]
        steps: Vec<u64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sample { config: path, out } => {
            let plan = config::parse_config(&path)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            let out_dir = runner::resolve_out_dir(&plan, &name, out);
            let result = runner::run_experiment(&plan, &out_dir)?;
            for outcome in &result.outcomes {
                match outcome.diverged {
                    None => println!(
                        "chain {}: {} samples retained, nfe {}",
                        outcome.chain,
                        outcome.report.samples.len(),
                        outcome.report.nfe_total
                    ),
                    Some((phase, step)) => println!(
                        "chain {}: DIVERGED during {phase} at step {step} ({} partial samples)",
                        outcome.chain,
                        outcome.report.samples.len()
                    ),
                }
            }
            println!("outputs written to {}", result.out_dir.display());
            if result.all_diverged {
                return Err(CliError::AllChainsDiverged);
            }
            Ok(())
        }
        Command::Verify { suite } => {
            let suites: Vec<Suite> = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![Suite::parse(&suite)?]
            };
            let mut failures = 0usize;
            for s in suites {
                for check in run_suite(s) {
                    println!("{}", check.line());
                    if !check.pass {
                        failures += 1;
                    }
                }
            }
            if failures > 0 {
                Err(CliError::Check(format!("{failures} check(s) failed")))
            } else {
                Ok(())
            }
        }
        Command::Metrics { samples, reference } => {
            let report = metrics_cmd::metrics_report(&samples, reference.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            Ok(())
        }
        Command::Nfe { eta, warm, steps } => {
            let curve = latentwalk_core::sampler::nfe_curve(eta, warm, &steps)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            println!("n,nfe_per_sample");
            for (n, v) in steps.iter().zip(curve) {
                println!("{n},{v}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
