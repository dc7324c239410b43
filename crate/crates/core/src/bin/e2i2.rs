use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use e2i2::config::ConfigError;
use e2i2::examples;
use e2i2::runner::{self, RunOptions};

#[derive(Parser)]
#[command(name = "e2i2", version, about = "Two-detector coincidence rates for intensity interferometry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scene config and write record.json plus any CSV output.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dotted `key=value` override, applied before validation.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Shorthand for `--override run.seed=N`.
        #[arg(long)]
        seed: Option<u64>,
        /// Record wall time in record.json.
        #[arg(long)]
        timing: bool,
    },
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run every shipped example and compare against its expected values.
    Examples {
        /// Directory holding manifest.toml.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(e: &ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    runner::init_threads();
    match cli.command {
        Command::Run { config, out, mut overrides, seed, timing } => {
            if let Some(s) = seed {
                overrides.push(format!("run.seed={s}"));
            }
            match runner::run(&config, &out, &RunOptions { overrides, timing }) {
                Ok(record) => {
                    println!("{} run written to {}", record.mode.as_str(), out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate { config, overrides } => match runner::validate(&config, &overrides) {
            Ok(report) => {
                print!("{report}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Examples { dir, out } => match examples::run_examples(&dir, &out) {
            Ok(outcomes) => {
                let mut ok = true;
                for o in &outcomes {
                    println!("{o}");
                    ok &= o.passed;
                }
                if ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                }
            }
            Err(e) => fail(&e),
        },
    }
}
