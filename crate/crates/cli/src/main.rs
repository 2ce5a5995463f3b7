use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ril_cli::run(std::env::args_os()))
}
