mod args;
mod bias_cmd;
mod config_file;
mod report_cmd;
mod train_cmd;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};

/// Failure classes mapped onto exit codes 2 and 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<calibrl::Error> for Failure {
    fn from(e: calibrl::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

fn parse() -> Result<(Cli, config_file::Entries), clap::Error> {
    let raw: Vec<String> = std::env::args().collect();
    let mut cmd = Cli::command();
    let (argv, file_entries) = match config_file::expand(&cmd, &raw) {
        Ok(x) => x,
        Err(msg) => return Err(cmd.error(clap::error::ErrorKind::Io, msg)),
    };
    let matches = cmd.try_get_matches_from_mut(argv)?;
    let cli = Cli::from_arg_matches(&matches)?;
    Ok((cli, file_entries))
}

fn main() -> ExitCode {
    let (cli, file_entries) = match parse() {
        Ok(x) => x,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: could not configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match &cli.command {
        Command::Train(a) => train_cmd::run(&cli, a, &file_entries),
        Command::Bias(a) => bias_cmd::run(&cli, a),
        Command::Report(a) => report_cmd::run(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
