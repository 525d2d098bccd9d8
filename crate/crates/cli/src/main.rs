use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = nodal_cli::Cli::parse();
    match nodal_cli::run_cli(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nodal: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
