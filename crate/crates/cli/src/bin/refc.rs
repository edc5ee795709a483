use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gramdiff_core::refc::{run_file, BugProfile};

/// Reference checker for the mini-language. Exits 0 on accept, 1 on reject,
/// 2 on usage errors and 42 on a simulated out-of-memory crash.
#[derive(Parser)]
#[command(name = "refc", version)]
struct Args {
    file: PathBuf,
    /// Seeded defects to enable: none, D1, D2, D3 or all.
    #[arg(long, default_value = "none")]
    profile: BugProfile,
    /// Seed declarations to use as the prelude instead of the shipped one.
    #[arg(long, value_name = "FILE")]
    context_seed: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = run_file(
        &args.file,
        args.profile,
        args.context_seed.as_deref(),
        &mut std::io::stderr(),
    );
    ExitCode::from(code as u8)
}
