use std::process::ExitCode;

fn main() -> ExitCode {
    templatefit::cli::main_with(std::env::args_os())
}
