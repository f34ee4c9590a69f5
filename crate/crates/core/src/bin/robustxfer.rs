use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(robustxfer::cli::main_exit_code() as u8)
}
