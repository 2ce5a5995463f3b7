//! Batch experiment runner behind the `ril` binary.
//!
//! Every subcommand produces a [`RunReport`]. With `--out DIR` the report,
//! its verdict section and any artifacts (DOT, transformed MDPs) are written
//! to `DIR`; otherwise the report is printed to stdout.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;

use clap::Parser;

pub use commands::{execute, Cli, Command, Executed, GlobalArgs};
pub use config::ExperimentConfig;
pub use report::RunReport;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    /// A reproduced table differs from the expected one.
    pub const DIFF: u8 = 1;
    /// Bad input file, config or flag.
    pub const INPUT: u8 = 2;
    /// Solver or linear-algebra failure.
    pub const NUMERICAL: u8 = 3;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure { code: exit::INPUT, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Failure { code: exit::NUMERICAL, message: message.into() }
    }
}

impl From<ril_core::Error> for Failure {
    fn from(e: ril_core::Error) -> Self {
        match &e {
            ril_core::Error::InvalidMdp(violations) => {
                let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
                Failure::input(format!("invalid MDP:\n{}", lines.join("\n")))
            }
            _ if e.is_numerical() => Failure::numerical(e.to_string()),
            _ => Failure::input(e.to_string()),
        }
    }
}

/// Worker count from `RIL_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var("RIL_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::input(format!("RIL_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}

/// Parses `args`, runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code().clamp(0, 255) as u8;
        }
    };
    let result = threads_from_env().and_then(|threads| {
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            pool = pool.num_threads(n);
        }
        let pool = pool.build().map_err(|e| Failure::input(format!("thread pool: {e}")))?;
        pool.install(|| execute(&cli))
    });
    match result.and_then(|done| done.emit().map(|_| done.code)) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
