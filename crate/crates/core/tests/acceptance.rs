//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on any failure.

use std::process::ExitCode;

use uwas_core::acceptance::{run_all, AcceptanceOptions};

fn main() -> ExitCode {
    // `cargo test -- --list` and filtered runs should not launch the suite.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let outcomes = run_all(&AcceptanceOptions::default(), |o| println!("{o}"));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "acceptance: {} passed, {} failed",
        outcomes.len() - failed,
        failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
