use std::process::ExitCode;

use bsd_cli::{parse_args, run, CliError, EXIT_USAGE};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match parse_args(std::env::args_os()) {
        Ok(cfg) => run(&cfg),
        Err(CliError::Clap(e)) => e.exit(),
        Err(e) => {
            eprintln!("bsd: {e}");
            EXIT_USAGE
        }
    };
    ExitCode::from(code as u8)
}
