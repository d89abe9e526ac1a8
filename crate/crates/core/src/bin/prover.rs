use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use termhint::cli::{diagnostics, report, run, Flags};

/// Runs event files and reports which theorems were proved.
#[derive(Parser)]
#[command(name = "prover", version)]
struct Args {
    /// Event files, each processed in a fresh world.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Print the proof trace of every theorem.
    #[arg(long)]
    trace: bool,
    /// Print failed subgoals with their labels.
    #[arg(long)]
    checkpoints: bool,
    /// Waterfall step limit per theorem.
    #[arg(long, value_name = "N", default_value_t = 10_000)]
    max_steps: u64,
    /// Stop at the first failed theorem.
    #[arg(long)]
    stop_on_failure: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let flags = Flags {
        trace: args.trace,
        checkpoints: args.checkpoints,
        max_steps: Some(args.max_steps),
        stop_on_failure: args.stop_on_failure,
    };
    let r = run(&args.files, &flags);
    print!("{}", report(&r, &flags));
    eprint!("{}", diagnostics(&r));
    ExitCode::from(r.exit_code() as u8)
}
