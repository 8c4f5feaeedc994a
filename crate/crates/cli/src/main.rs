mod args;
mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::parser::ValueSource;
use clap::{ArgAction, CommandFactory, FromArgMatches};
use semlink::harness::ConfigFile;
use semlink::Error;

use args::Cli;

fn command() -> clap::Command {
    Cli::command()
        .args_override_self(true)
        .mut_subcommands(|s| s.args_override_self(true))
}

enum Failure {
    Usage(clap::Error),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<clap::Error> for Failure {
    fn from(e: clap::Error) -> Self {
        Failure::Usage(e)
    }
}

/// Re-parses `argv` with the config file's entries inserted right after the
/// subcommand. Keys already given on the command line are skipped.
fn parse(argv: Vec<OsString>) -> Result<Cli, Failure> {
    let matches = command().try_get_matches_from(&argv)?;
    let cli = Cli::from_arg_matches(&matches)?;
    let Some(path) = &cli.config else {
        return Ok(cli);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let config = ConfigFile::parse(&text)?;
    let (name, given) = matches.subcommand().expect("subcommand is required");
    let root = command();
    let sub = root.find_subcommand(name).expect("parsed subcommand exists");

    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in config.iter() {
        let long = key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()) && long != "config" && long != "help")
            .ok_or_else(|| Error::Config(format!("config key {key:?} is not an option of {name}")))?;
        if given.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value {
                "true" => injected.push(format!("--{long}").into()),
                "false" => {}
                _ => return Err(Error::Config(format!("config key {key:?} expects true or false")).into()),
            },
            _ => injected.push(format!("--{long}={value}").into()),
        }
    }

    let pos = argv
        .iter()
        .enumerate()
        .skip(1)
        .position(|(i, a)| a == name && argv[i - 1] != "--config")
        .map(|p| p + 1)
        .expect("subcommand appears in argv");
    let mut merged = argv[..=pos].to_vec();
    merged.extend(injected);
    merged.extend_from_slice(&argv[pos + 1..]);
    let matches = command().try_get_matches_from(merged)?;
    Ok(Cli::from_arg_matches(&matches)?)
}

fn write_output(cli: &Cli, csv: &str) -> Result<(), Error> {
    match commands::output_path(&cli.command) {
        Some(path) => std::fs::write(path, csv).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(csv.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(Failure::Usage(e)) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    match commands::run(&cli.command).and_then(|o| write_output(&cli, &o.table.to_csv()).map(|_| o)) {
        Ok(o) if o.failed_checks > 0 => {
            eprintln!("error: {} self-check(s) failed", o.failed_checks);
            ExitCode::from(1)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
