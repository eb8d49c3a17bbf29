use std::process::ExitCode;

fn main() -> ExitCode {
    orca_core::cli::main()
}
