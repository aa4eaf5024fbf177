use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sdelab_cli::acceptance::Budget;
use sdelab_cli::{catalog, spec, verify, with_pool};

#[derive(Parser)]
#[command(name = "sdelab", version, about = "Coupling-of-noise experiments for scalar SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment specification.
    Run { spec: PathBuf },
    /// List the built-in models.
    Models {
        /// Print the catalog as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the acceptance suite.
    Verify {
        /// Small budgets; checks plumbing and determinism only.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value = "verify-out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

const USAGE: u8 = 2;
const FAILED_VERDICT: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Models { json } => {
            let entries = catalog::catalog();
            if json {
                println!("{}", serde_json::to_string_pretty(&entries).expect("catalog serializes"));
            } else {
                for e in entries {
                    let criteria: Vec<String> = e.criteria.iter().map(u8::to_string).collect();
                    println!("{:<22} {}  [criteria {}]", e.name, e.description, criteria.join(", "));
                }
            }
            ExitCode::SUCCESS
        }
        Command::Run { spec: path } => {
            let resolved = match spec::load(&path) {
                Ok(r) => r,
                Err(e) => {
                    eprint!("{e}");
                    return ExitCode::from(USAGE);
                }
            };
            let reproduce = format!("sdelab run {}  # seed {}", path.display(), resolved.seed);
            match with_pool(|| sdelab_cli::run_spec(&resolved, &reproduce)) {
                Ok(Ok(outcome)) => {
                    for note in &outcome.notes {
                        println!("{note}");
                    }
                    println!("{}: {}", resolved.id, sdelab_cli::output::verdict(outcome.pass));
                    if outcome.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(FAILED_VERDICT)
                    }
                }
                Ok(Err(e)) | Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Verify { quick, out, seed } => {
            let budget = if quick { Budget::QUICK } else { Budget::FULL };
            match with_pool(|| verify(&out, budget, seed, |line| println!("{line}"))) {
                Ok(Ok(true)) => ExitCode::SUCCESS,
                Ok(Ok(false)) => ExitCode::from(FAILED_VERDICT),
                Ok(Err(e)) | Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
