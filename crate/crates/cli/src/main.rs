//! Command-line front end for the stream correlation engine.
//!
//! Exit codes: 0 success, 1 validation error (bad arguments, config, or
//! schema), 2 runtime stage failure.

mod commands;
mod pipeline;
mod util;

use clap::Parser;
use stepcorr::Error;

#[derive(Debug, Parser)]
#[command(
    name = "stepcorr",
    version,
    about = "Online change detection, stepwise event correlation, and forecasting"
)]
struct Cli {
    #[command(subcommand)]
    command: commands::Command,
}

fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<Error>() {
            return match core {
                Error::Schema(_)
                | Error::InvalidSpec(_)
                | Error::InvalidParameter(_)
                | Error::MissingColumn(_)
                | Error::LengthMismatch { .. } => 1,
                _ => 2,
            };
        }
    }
    2
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/usage text
            let _ = e.print();
            let code = if e.use_stderr() { 1 } else { 0 };
            std::process::exit(code);
        }
    };
    if let Err(err) = commands::run(cli.command) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}
