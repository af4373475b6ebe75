use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hklab::{run_file, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(
    name = "hklab",
    version,
    about = "Return-probability experiments on graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV files.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run tori too small for the configured rates and times.
        #[arg(long)]
        allow_wrap: bool,
    },
    /// Parse and validate an experiment without running it.
    Validate {
        config: PathBuf,
        #[arg(long)]
        allow_wrap: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            allow_wrap,
        } => {
            let opts = RunOptions {
                seed,
                out_dir: out,
                allow_wrap,
            };
            run_file(&config, &opts).map(|(outcome, written)| {
                print!("{}", outcome.summary);
                for path in written {
                    println!("wrote {}", path.display());
                }
                outcome.exit_code
            })
        }
        Command::Validate { config, allow_wrap } => std::fs::read_to_string(&config)
            .map_err(|e| hklab::CliError::Parse(format!("{}: {e}", config.display())))
            .and_then(|text| ExperimentConfig::parse(&text))
            .and_then(|c| c.validate(allow_wrap).map(|_| c))
            .map(|c| {
                println!("ok: {} experiment", c.kind.as_str());
                0
            }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
