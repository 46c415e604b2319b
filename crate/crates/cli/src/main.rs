use std::process::ExitCode;

use torus_lqg_cli::{commands, error::CliError};

fn main() -> ExitCode {
    match commands::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                // clap's rendering already carries its own "error:" prefix and usage.
                CliError::Usage(msg) => eprint!("{}", msg.trim_end_matches('\n').to_owned() + "\n"),
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
