use std::process::ExitCode;

fn main() -> ExitCode {
    hapbot_cli::run(std::env::args_os())
}
