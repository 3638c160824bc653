//! Acceptance run: builds the shipped quantizers at full settings and prints one
//! PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

use std::process::ExitCode;

use spq::suite::{acceptance, Fixture, Settings};
use spq_core::rng::DEFAULT_SEED;

fn main() -> ExitCode {
    let settings = Settings::full(DEFAULT_SEED);
    println!(
        "acceptance: seed {DEFAULT_SEED:#x}, {} samples per check",
        settings.samples
    );
    let fixture = match Fixture::build(&settings, true) {
        Ok(f) => f,
        Err(e) => {
            println!("FAIL  building the shipped quantizers: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let reports = acceptance(&fixture, &settings);
    for r in &reports {
        println!("{}", r.line());
    }
    let passed = reports.iter().filter(|r| r.pass).count();
    println!("{passed}/{} criteria passed", reports.len());
    if passed == reports.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
