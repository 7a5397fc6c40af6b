use std::process::ExitCode;

use chi2dens_cli::{execute, Cli, FailureKind};
use clap::error::ErrorKind;
use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(FailureKind::Usage.exit_code() as u8),
            };
        }
    };
    match execute(&cli) {
        Ok(outcome) if outcome.passed => {
            println!("{}", outcome.output.display());
            ExitCode::SUCCESS
        }
        Ok(outcome) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": FailureKind::Numeric,
                    "exit_code": FailureKind::Numeric.exit_code(),
                    "message": format!("verification failed; see {}", outcome.output.display()),
                })
            );
            ExitCode::from(FailureKind::Numeric.exit_code() as u8)
        }
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::from(failure.kind.exit_code() as u8)
        }
    }
}
