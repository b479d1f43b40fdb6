use std::process::ExitCode;

use clap::Parser;
use gec_cli::{run, Args};

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            // --help and --version are not errors.
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = run(&args);
    if let Some(m) = &outcome.manifest {
        eprintln!(
            "gec: {} {} -> {} ({} files)",
            m.kind,
            m.status,
            outcome.out_dir.display(),
            m.files.len()
        );
    }
    if let Some(e) = &outcome.error {
        eprintln!("gec: error: {e}");
    }
    ExitCode::from(outcome.exit_code())
}
