//! Acceptance battery at full scale. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any criterion fails.
//!
//! SPHERE_RAMSEY_WORKERS overrides the worker count; the seed is fixed.

use std::process::ExitCode;

use sphere_ramsey::geometry::solve_cap_threshold;
use sphere_ramsey::verify::{run_check, Level, SuiteConfig, CHECK_COUNT};

const SEED: u64 = 20_261_016;

/// Wall-clock budget per criterion in seconds. The determinism criterion
/// times its own reruns, so its budget covers two quick passes.
const BUDGET_SECONDS: [f64; CHECK_COUNT as usize] =
    [1.0, 1.0, 1.0, 10.0, 300.0, 30.0, 30.0, 300.0, 600.0, 300.0, 60.0, 60.0, 60.0, 10.0, 1.0, 120.0];

fn workers() -> usize {
    std::env::var("SPHERE_RAMSEY_WORKERS")
        .ok()
        .and_then(|w| w.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn main() -> ExitCode {
    let cfg = SuiteConfig::new(Level::Full, SEED, workers());
    let mut failures = 0;
    for id in 1..=CHECK_COUNT {
        let r = run_check(&cfg, id);
        let budget = BUDGET_SECONDS[id as usize - 1];
        let in_time = r.seconds < budget;
        let ok = r.passed && in_time;
        failures += usize::from(!ok);
        let timing = if in_time { String::new() } else { format!(" [over budget {budget} s]") };
        println!(
            "{} criterion {:>2} {:<26} {:>7.2} s  {}{timing}",
            if ok { "PASS" } else { "FAIL" },
            id,
            r.name,
            r.seconds,
            r.detail
        );
    }

    // A threshold solver biased by 1e-3 must be caught by the round-trip check.
    let tampered = SuiteConfig::new(Level::Quick, SEED, 1)
        .with_cap_solver(Box::new(|k, p| Ok(solve_cap_threshold(k, p)?.c + 1e-3)));
    let caught = !run_check(&tampered, 2).passed;
    failures += usize::from(!caught);
    println!(
        "{} sensitivity: biased threshold solver {}",
        if caught { "PASS" } else { "FAIL" },
        if caught { "rejected" } else { "accepted" }
    );

    println!("{} of {} lines failed", failures, CHECK_COUNT + 1);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
