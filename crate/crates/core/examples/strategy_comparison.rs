//! Runs all six strategies over a few seeds and prints mean mAP per
//! ground-truth mode.
//!
//! cargo run --release --example strategy_comparison -- [SEEDS]

use std::time::Instant;

use modar_v2x::experiment::{run_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4);
    let cfg = ExperimentConfig {
        seeds: (1..=seeds).collect(),
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let outcome = run_experiment(&cfg)?;
    println!(
        "{:<16} {:<9} {:>8} {:>7} {:>12}",
        "strategy", "gt_mode", "mAP", "std", "bytes/frame"
    );
    for r in &outcome.summary {
        println!(
            "{:<16} {:<9} {:>8.2} {:>7.2} {:>12.0}",
            r.strategy,
            r.gt_mode.as_str(),
            100.0 * r.map_mean,
            100.0 * r.map_std,
            r.bytes_mean
        );
    }
    println!("{} seeds in {:.1?}", seeds, start.elapsed());
    Ok(())
}
