//! AC1–AC13 at their stated tolerances, one line per criterion.
//!
//! `cargo test -p flockmf-cli --test acceptance -- AC5 AC6` runs a subset.

use std::process::ExitCode;

use flockmf_cli::acceptance::{criteria, Mutation};

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for c in criteria() {
        if !filters.is_empty() && !filters.iter().any(|f| f == c.id) {
            continue;
        }
        let r = c.evaluate(Mutation::None);
        println!("{}", r.line());
        for check in &r.checks {
            println!("    {}", check.line());
        }
        if !r.passed {
            failed.push(r.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
