use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(thetaprime_cli::run(std::env::args_os()))
}
