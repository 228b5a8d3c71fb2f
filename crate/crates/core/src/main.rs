use std::process::ExitCode;

fn main() -> ExitCode {
    cognizance::cli::run()
}
