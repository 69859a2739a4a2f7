use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mcgraph::coefficients::{convergence_radius, recursion_table};
use mcgraph::config::DEFAULT_CONFIG;
use mcgraph::run::{run, verify_run};
use mcgraph::verify::VerificationReport;
use mcgraph::Error;

/// Entire graphs of small prescribed mean curvature over R^3.
#[derive(Parser)]
#[command(name = "mcgraph", version)]
struct Cli {
    /// Worker threads; computations are single-threaded and deterministic,
    /// so any value gives identical results.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, verify and write a run directory.
    Run {
        config: PathBuf,
    },
    /// Print the majorant recursion coefficients as CSV.
    Coeffs {
        #[arg(long = "K", short = 'K', default_value_t = 8)]
        k: usize,
    },
    /// Recompute a run directory and compare every artifact.
    Verify {
        run_dir: PathBuf,
    },
    /// Print the default configuration.
    PrintConfig,
}

const OUTPUT_ROOT: &str = "MCGRAPH_OUTPUT_ROOT";

fn exit_for(e: &Error) -> ExitCode {
    match e {
        Error::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn summarize(report: &VerificationReport) {
    for c in &report.checks {
        let value = c.value.map_or("n/a".to_string(), |v| format!("{v:.3e}"));
        let status = if c.passed { "ok" } else { "FAILED" };
        println!("{:<16} {:>10}  (threshold {:.1e})  {status}", c.name, value, c.threshold);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::PrintConfig => {
            print!("{DEFAULT_CONFIG}");
            ExitCode::SUCCESS
        }
        Command::Coeffs { k } => match recursion_table(k) {
            Ok(table) => {
                print!("{}", table.to_csv());
                eprintln!("radius of convergence: {:.15}", convergence_radius());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run { config } => {
            let root = std::env::var_os(OUTPUT_ROOT).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
            match run(&config, &root) {
                Ok(outcome) => {
                    println!("wrote {} artifacts to {}", outcome.manifest.artifacts.len(), outcome.manifest.output_dir.display());
                    for w in &outcome.manifest.warnings {
                        println!("warning: {w}");
                    }
                    summarize(&outcome.report);
                    if outcome.report.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_for(&e)
                }
            }
        }
        Command::Verify { run_dir } => match verify_run(&run_dir) {
            Ok(outcome) => {
                summarize(&outcome.report);
                for name in &outcome.mismatched {
                    println!("mismatch: {name}");
                }
                for name in &outcome.missing {
                    println!("missing: {name}");
                }
                if outcome.passed() {
                    println!("run reproduced");
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_for(&e)
            }
        },
    }
}
