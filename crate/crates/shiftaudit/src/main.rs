use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use shiftaudit::cli::{self, Cli, EXIT_USAGE};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE as u8),
            };
        }
    };
    match cli::run(cli) {
        Ok(res) => {
            eprintln!("{}", res.summary);
            if res.exit_code == cli::EXIT_NOT_CONVERGED {
                eprintln!("error: solver did not converge; artifact written with converged = false");
            }
            ExitCode::from(res.exit_code as u8)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
