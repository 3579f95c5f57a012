use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use costshare::verifier::{VerifyConfig, DEFAULT_GRID_BUDGET};
use costshare::Money;
use costshare_cli::{cmd_run, cmd_sweep, cmd_verify, write_csv, CliError, SweepParam, VerifySource};

/// Two-stage cost-sharing auction for community router features.
#[derive(Parser)]
#[command(name = "costshare", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the mechanism on a scenario file and print the outcome.
    Run {
        file: PathBuf,
        /// Comma-separated strategy per user: truthful, equilibrium or fixed.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<String>>,
        /// Also write the per-user rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Audit the equilibrium and brute-force stage-2 best responses.
    Verify(VerifyArgs),
    /// Run a scenario across a range of one parameter and print CSV.
    Sweep {
        file: PathBuf,
        /// cost_scale or n.
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: Money,
        #[arg(long)]
        to: Money,
        #[arg(long)]
        step: Money,
        /// Write to a file instead of standard output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(required_unless_present = "random", conflicts_with = "random")]
    file: Option<PathBuf>,
    /// Random instances: MAX_USERS MAX_FEATURES SEED COUNT.
    #[arg(long, num_args = 4, value_names = ["N", "K", "SEED", "COUNT"])]
    random: Option<Vec<u64>>,
    /// Grid increment (default: the scenario's epsilon).
    #[arg(long)]
    eps: Option<Money>,
    /// Largest bid explored (default: largest true value, rounded up).
    #[arg(long)]
    cap: Option<Money>,
    /// Random opponent profiles per lemma check.
    #[arg(long, default_value_t = 50)]
    samples: usize,
    /// Most schedules one search may enumerate.
    #[arg(long, default_value_t = DEFAULT_GRID_BUDGET)]
    budget: u64,
}

fn write_output(path: &PathBuf, reports: &[costshare_cli::RunReport]) -> Result<(), CliError> {
    let output_error = |e: &dyn std::fmt::Display| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let file = File::create(path).map_err(|e| output_error(&e))?;
    write_csv(file, reports).map_err(|e| output_error(&e))
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let stdout = io::stdout();
    match cli.command {
        Command::Run { file, strategies, csv } => {
            let report = cmd_run(&file, strategies.as_deref())?;
            print!("{}", report.to_text());
            if let Some(path) = csv {
                write_output(&path, std::slice::from_ref(&report))?;
            }
            Ok(true)
        }
        Command::Verify(args) => {
            let config = VerifyConfig {
                epsilon: args.eps,
                cap: args.cap,
                samples: args.samples,
                budget: args.budget,
            };
            let source = match (&args.file, &args.random) {
                (_, Some(r)) => VerifySource::Random {
                    users: r[0] as usize,
                    features: r[1] as usize,
                    seed: r[2],
                    count: r[3] as usize,
                },
                (Some(file), None) => VerifySource::File(file),
                (None, None) => unreachable!("clap requires a file or --random"),
            };
            let report = cmd_verify(source, &config)?;
            let mut out = stdout.lock();
            let _ = writeln!(out, "{}", report.to_json());
            Ok(report.pass)
        }
        Command::Sweep {
            file,
            param,
            from,
            to,
            step,
            csv,
        } => {
            let reports = cmd_sweep(&file, SweepParam::parse(&param)?, &from, &to, &step)?;
            match csv {
                Some(path) => write_output(&path, &reports)?,
                None => write_csv(stdout.lock(), &reports).map_err(|e| CliError::Output {
                    path: "standard output".to_string(),
                    message: e.to_string(),
                })?,
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
