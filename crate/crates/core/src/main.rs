use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ev_alsac::bench::{self, trace::parse_day_range, Failure};

/// Constrained EV charging experiments.
#[derive(Parser)]
#[command(name = "ev-alsac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train or roll out the configured method and evaluate it on the test split.
    Run { config: PathBuf },
    /// Tabulate finished runs that share evaluation data.
    Compare {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Hourly schedule of a run over test episodes `a..b`.
    Trace {
        manifest: PathBuf,
        #[arg(long)]
        days: String,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run { config } => bench::run(&config).map(|r| {
            println!(
                "{}: avg cost {:.6} EUR, avg violation {:.6} kWh over {} episodes ({:.1} s)",
                r.label,
                r.avg_cost_eur.unwrap_or(f64::NAN),
                r.avg_violation_kwh.unwrap_or(f64::NAN),
                r.eval_episodes,
                r.wall_clock_seconds
            );
        }),
        Command::Compare { manifests, output } => bench::compare(&manifests, &output).map(|t| print!("{t}")),
        Command::Trace { manifest, days, output } => parse_day_range(&days)
            .map_err(Failure::Validation)
            .and_then(|days| bench::trace(&manifest, days, &output))
            .map(|n| println!("wrote {n} rows to {}", output.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
