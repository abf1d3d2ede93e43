use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use gdg_cli::args::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let clock = Instant::now();
    let result = gdg_cli::run(cli);
    log::debug!("finished in {:.2?}", clock.elapsed());
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

