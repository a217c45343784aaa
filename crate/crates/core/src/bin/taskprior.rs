use std::process::ExitCode;

fn main() -> ExitCode {
    taskprior::cli::main_with_args(std::env::args_os())
}
