mod args;
mod commands;
mod error;
mod report;

use clap::Parser;

use crate::error::ExitCode;

fn main() {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::Usage } else { ExitCode::Ok };
            let _ = e.print();
            std::process::exit(code as i32);
        }
    };
    if let Err(e) = commands::run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code() as i32);
    }
}
