use std::process::ExitCode;

fn main() -> ExitCode {
    retrial_cli::run(std::env::args_os())
}
