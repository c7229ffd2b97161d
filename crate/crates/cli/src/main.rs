use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use dqreg_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let out = match &cli.command {
        dqreg_cli::Command::Fit { common, .. }
        | dqreg_cli::Command::Quantiles { common, .. }
        | dqreg_cli::Command::Bootstrap { common, .. }
        | dqreg_cli::Command::Simulate { common, .. }
        | dqreg_cli::Command::Diagnose { common, .. } => common.out.clone(),
    };
    match execute(&cli) {
        Ok(json) => {
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, &json) {
                        eprintln!("cannot write {}: {e}", path.display());
                        return ExitCode::from(1);
                    }
                }
                None => println!("{json}"),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
