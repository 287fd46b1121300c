use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FRAMEFILL_LOG", "warn")).init();
    framefill_cli::run(framefill_cli::Cli::parse())
}
