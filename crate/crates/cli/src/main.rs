mod args;
mod commands;
mod config;
mod error;
mod pairs;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Sample(a) => commands::sample(a),
        Command::Pair(a) => pairs::pair(a),
        Command::Replay(a) => pairs::replay(a),
        Command::Noise(a) => commands::noise(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Phantom(a) => commands::phantom(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qmrisim: {e}");
            ExitCode::from(e.code())
        }
    }
}
