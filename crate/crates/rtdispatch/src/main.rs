use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(rtdispatch::cli::run(std::env::args_os()))
}
