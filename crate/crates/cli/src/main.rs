use std::io::Write;
use std::process::ExitCode;

use corrwitness_cli::{configure_threads, execute};

fn main() -> ExitCode {
    let threads = std::env::var("CORRWITNESS_THREADS").ok();
    if let Err(err) = configure_threads(threads.as_deref()) {
        eprintln!("{}", err.to_json());
        return ExitCode::from(err.exit_code() as u8);
    }
    let outcome = execute(std::env::args_os());
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    if !outcome.stderr.is_empty() {
        eprintln!("{}", outcome.stderr);
    }
    ExitCode::from(outcome.code as u8)
}
