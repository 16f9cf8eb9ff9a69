//! Runner for the acceptance criteria: each criterion prints one line,
//! `[PASS]` or `[FAIL]`, followed by its measured values.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

/// Outcome of one criterion with the numbers behind it.
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

pub struct Criterion {
    pub id: &'static str,
    pub name: &'static str,
    pub check: fn() -> Verdict,
}

/// Runs every criterion, printing one line each. A panic counts as a failure.
/// Returns the number of failures.
pub fn run_all(criteria: &[Criterion]) -> usize {
    let mut failures = 0;
    for c in criteria {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Verdict::new(false, format!("panicked: {msg}"))
        });
        if !verdict.pass {
            failures += 1;
        }
        let tag = if verdict.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {} {} ({:.1}s): {}", c.id, c.name, start.elapsed().as_secs_f64(), verdict.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    failures
}
