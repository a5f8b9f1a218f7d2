//! Library side of the `mtf` command: argument handling, archives and the
//! fit / predict pipelines, exposed so tests can drive them in-process.

pub mod archive;
pub mod args;
mod commands;
pub mod pipeline;

use std::ffi::OsString;

use clap::Parser;
use mtf_core::Error;

pub use args::Cli;

/// Exit status for an error: 2 for usage and validation errors, 1 for
/// runtime failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_)
        | Error::Shape(_)
        | Error::InvalidCollection(_)
        | Error::ConstantFiber { .. }
        | Error::SparseFiber { .. }
        | Error::Parse { .. } => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
