mod args;
mod commands;
mod error;
mod input;
mod output;
mod plot;
mod sweep;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{dist, gen, hedge, verify};
use error::CliResult;

fn run(cli: &Cli) -> CliResult<()> {
    let report = match &cli.command {
        Command::Dist(a) => dist::dist(a)?,
        Command::Wass(a) => dist::wass(a)?,
        Command::Weak(a) => dist::weak(a)?,
        Command::Seminorm(a) => dist::seminorm_cmd(a)?,
        Command::Project(a) => dist::project(a)?,
        Command::Hedge(c) => hedge::run(c)?,
        Command::Gen(c) => return gen::run(c, &cli.out),
        Command::Verify(c) => {
            let v = verify::run(c, &cli.out)?;
            output::emit(&cli.out, &v.report)?;
            return v.failure.map_or(Ok(()), Err);
        }
    };
    output::emit(&cli.out, &report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("awd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

