//! Runs every acceptance criterion at full size and prints one line each.

use std::process::ExitCode;

use noma_octr::harness::suite::{run_suite, SuiteConfig};

fn main() -> ExitCode {
    let cfg = if std::env::var_os("OCTR_QUICK").is_some() {
        SuiteConfig::quick()
    } else {
        SuiteConfig::full()
    };
    let results = run_suite(&cfg, |c| println!("{c}"));
    let failed = results.iter().filter(|c| !c.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
