use std::process::ExitCode;

fn main() -> ExitCode {
    match grasorw::cli::main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("grasorw: {e}");
            ExitCode::FAILURE
        }
    }
}
