use std::io;
use std::process::ExitCode;

use cnlcu_cli::{parse_args, run, CliError};

fn main() -> ExitCode {
    let outcome = parse_args(std::env::args_os()).and_then(|parsed| {
        run(&parsed, &mut io::stdout().lock(), &mut io::stderr().lock())
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            ExitCode::from(e.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
