use std::process::ExitCode;

use mer_cli::{run_from_args, Services};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let exit = run_from_args(std::env::args_os(), &Services::default(), &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(exit as u8)
}
