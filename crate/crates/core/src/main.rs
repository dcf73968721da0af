use std::process::ExitCode;

fn main() -> ExitCode {
    edgeledger::cli::main_with_args(std::env::args_os())
}
