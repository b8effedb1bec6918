//! A small Monte-Carlo coverage study under the three-type Poisson truth:
//! simulate, fit a Strauss model, and compare estimated with empirical
//! standard errors on two window sizes.
//!
//! `cargo run --release --example coverage_study [replications]`

use mtgibbs::simulate::{run_study, ProtocolTruth, StudyConfig};

fn main() -> mtgibbs::Result<()> {
    let reps = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(40);
    let cfg = StudyConfig::protocol(ProtocolTruth::Poisson, vec![1.0, 2.0], reps, 42, 30);
    let report = run_study(&cfg)?;
    for w in &report.windows {
        let mean: Vec<String> = w.mean_counts.iter().map(|c| format!("{c:.0}")).collect();
        let expected: Vec<String> = w.expected_counts.iter().map(|c| format!("{c:.0}")).collect();
        println!(
            "window [0,{}]^2: {} replications, {} failed, mean counts {} (expected {})",
            w.side,
            w.replications,
            w.failures,
            mean.join("/"),
            expected.join("/")
        );
    }
    println!(
        "{:<3} {:<12} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "W", "parameter", "truth", "bias", "emp.se", "est.se", "coverage"
    );
    for row in &report.rows {
        println!(
            "{:<3} {:<12} {:>8.3} {:>8.3} {:>8.4} {:>8.4} {:>8.3}",
            row.window + 1,
            row.parameter,
            row.truth,
            row.bias,
            row.empirical_se,
            row.mean_estimated_se,
            row.coverage
        );
    }
    Ok(())
}
