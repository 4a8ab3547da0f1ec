use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(yamabe::cli::run(std::env::args_os()))
}
