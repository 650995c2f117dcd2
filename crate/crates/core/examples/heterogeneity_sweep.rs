//! Swaps the stronger detector profile for the weaker one agent by agent
//! and compares late-early collaboration with propagated late fusion.
//!
//! cargo run --release --example heterogeneity_sweep -- [SEEDS]

use modar_v2x::experiment::{sweep_heterogeneity, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(6);
    let cfg = ExperimentConfig {
        seeds: (1..=seeds).collect(),
        ..ExperimentConfig::default()
    };
    println!("{:>10} {:>11} {:>16}", "profile-S", "LATE_EARLY", "LATE_ASYNC_PROP");
    for r in sweep_heterogeneity(&cfg)? {
        println!(
            "{:>10} {:>11.2} {:>16.2}",
            r.profile_s_agents,
            100.0 * r.map_mean,
            100.0 * r.late_async_prop_mean
        );
    }
    Ok(())
}
