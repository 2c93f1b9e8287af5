//! `stylesteer` binary. Every failure ends as one JSON line on stderr,
//! `{"error":{"kind":..,"code":..,"message":..}}`, and a nonzero exit:
//! 2 usage (also not-found and I/O), 3 backend, 4 integrity, 5 divergence.

mod args;
mod commands;

use std::fmt;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use serde_json::json;
use stylesteer::error::{Error, ErrorKind};

use args::Cli;

/// A usage error raised by the CLI itself rather than the library.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Attaches an already-written report path to a divergence failure.
#[derive(Debug)]
struct Diverged {
    source: Error,
    report_path: String,
}

impl fmt::Display for Diverged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (report written to {})", self.source, self.report_path)
    }
}

impl std::error::Error for Diverged {}

pub(crate) fn diverged(source: Error, report_path: String) -> anyhow::Error {
    anyhow::Error::new(Diverged { source, report_path })
}

fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    for cause in err.chain() {
        if cause.is::<Diverged>() {
            return (ErrorKind::Divergence.as_str(), 5);
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            let kind = e.kind();
            let code = match kind {
                ErrorKind::Usage | ErrorKind::NotFound | ErrorKind::Io => 2,
                ErrorKind::Backend => 3,
                ErrorKind::Integrity => 4,
                ErrorKind::Divergence => 5,
            };
            return (kind.as_str(), code);
        }
        if cause.is::<UsageError>() {
            return ("usage", 2);
        }
    }
    ("io", 2)
}

fn report_error(kind: &str, code: u8, message: &str) -> ExitCode {
    let line = json!({ "error": { "kind": kind, "code": code, "message": message } });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn init_logging(filter: &str) {
    let level = filter
        .parse::<tracing_subscriber::filter::LevelFilter>()
        .unwrap_or(tracing_subscriber::filter::LevelFilter::WARN);
    let _ = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .try_init();
}

fn main() -> ExitCode {
    let parsed = Cli::command()
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m).map(|cli| (cli, m)));
    let (cli, matches) = match parsed {
        Ok(p) => p,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand {
                    ExitCode::from(2)
                } else {
                    ExitCode::SUCCESS
                };
            }
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let first = first.trim_start_matches("error: ").trim();
            return report_error("usage", 2, first);
        }
    };
    init_logging(&cli.log);
    let sub = match matches.subcommand() {
        Some((_, m)) => m.clone(),
        None => matches.clone(),
    };
    match commands::run(cli, &sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = classify(&e);
            report_error(kind, code, &format!("{e:#}"))
        }
    }
}
