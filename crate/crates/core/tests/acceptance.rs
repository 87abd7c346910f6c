//! Acceptance criteria, one line each. Set GDB_ACCEPTANCE_FULL=1 for the
//! 10^5-trial guessing experiment.

use gdb_core::acceptance::{format_line, run_suite, SuiteOptions};

#[test]
fn acceptance_criteria() {
    let opts =
        if std::env::var_os("GDB_ACCEPTANCE_FULL").is_some() { SuiteOptions::full() } else { SuiteOptions::quick() };
    let results = run_suite(&opts);
    for r in &results {
        println!("{}", format_line(r));
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.id.as_str()).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
