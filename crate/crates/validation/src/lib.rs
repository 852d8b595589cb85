//! Reporting helpers for the acceptance suite: each criterion collects named
//! checks and prints a single pass/fail line.

use std::fmt;
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct Criterion {
    pub id: u32,
    pub title: String,
    pub checks: Vec<Check>,
    started: Instant,
    elapsed: Option<Duration>,
}

impl Criterion {
    pub fn new(id: u32, title: &str) -> Self {
        Criterion {
            id,
            title: title.to_string(),
            checks: Vec::new(),
            started: Instant::now(),
            elapsed: None,
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// Records the run time and fails the criterion if it exceeds `budget`.
    pub fn finish(mut self, budget: Duration) -> Self {
        let elapsed = self.started.elapsed();
        self.elapsed = Some(elapsed);
        self.check(
            "runtime",
            elapsed <= budget,
            format!(
                "{:.1}s of {:.0}s",
                elapsed.as_secs_f64(),
                budget.as_secs_f64()
            ),
        );
        self
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "criterion {} {verdict}: {}", self.id, self.title)?;
        for c in &self.checks {
            let mark = if c.passed { "ok" } else { "FAILED" };
            write!(f, "\n    [{mark}] {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Prints every criterion and returns the process exit status.
pub fn summarize(criteria: &[Criterion]) -> i32 {
    for c in criteria {
        println!("{c}");
    }
    let failed: Vec<u32> = criteria
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.id)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
        0
    } else {
        println!("acceptance: failed criteria {failed:?}");
        1
    }
}
