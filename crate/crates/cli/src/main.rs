//! `tuckercomp` command-line tool.

mod args;
mod data;
mod error;
mod output;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Complete(a) => run::cmd_complete(a),
        Command::Sweep(a) => run::cmd_sweep(a),
        Command::Synth(a) => data::cmd_synth(a),
        Command::Mask(a) => data::cmd_mask(a),
        Command::Metrics(a) => data::cmd_metrics(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
