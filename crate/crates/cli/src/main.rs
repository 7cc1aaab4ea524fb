mod analyze;
mod args;
mod data;
mod game;
mod output;
mod plot;
mod run;
mod serve;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// Bad arguments discovered after parsing; exits like a clap error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => data::synth(a),
        Command::Features(a) => data::features(a),
        Command::Simulate(a) => run::simulate(a),
        Command::Hpo(a) => run::hpo(a),
        Command::Analyze(a) => analyze::analyze(a),
        Command::Stats(a) => run::stats(a),
        Command::GameSim(a) => game::game_sim(a),
        Command::Serve(a) => serve::serve(a),
        Command::Replay(a) => game::replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
