use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use abelkern_cli::{configure_threads, run, validate, CliError, RunConfig, VERSION};

#[derive(Parser)]
#[command(name = "abelkern", version = VERSION, about = "Lattice kernels for diffusions and Abelian functionals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the job described by a TOML configuration.
    Run {
        config: PathBuf,
        /// Overrides `output` from the configuration.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the default invariant suite.
    Validate {
        #[arg(long, default_value = "abelkern-validate")]
        output: PathBuf,
    },
    /// Print the tool version.
    Version,
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(o) = output {
                cfg.output = o;
            }
            let outcome = run(&cfg)?;
            Ok(format!("{} (artifacts in {})", outcome.summary, cfg.output.display()))
        }
        Command::Validate { output } => {
            let cfg = validate::default_config(output);
            let outcome = run(&cfg)?;
            Ok(format!("{} (artifacts in {})", outcome.summary, cfg.output.display()))
        }
        Command::Version => Ok(format!("abelkern {VERSION}")),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("abelkern: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
