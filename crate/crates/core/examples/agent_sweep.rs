//! mAP of late-early collaboration as agents join the network one by one
//! (ego, then the roadside unit, then the other vehicles).
//!
//! cargo run --release --example agent_sweep -- [SEEDS]

use modar_v2x::experiment::{sweep_agents, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(6);
    let cfg = ExperimentConfig {
        seeds: (1..=seeds).collect(),
        ..ExperimentConfig::default()
    };
    let rows = sweep_agents(&cfg, 1..=cfg.scenario.agent_count)?;
    println!("{:>6} {:>8} {:>7} {:>7}", "agents", "mAP", "sem", "gain");
    let mut prev: Option<f64> = None;
    for r in &rows {
        let gain = prev.map(|p| 100.0 * (r.map_mean - p)).unwrap_or(0.0);
        println!(
            "{:>6} {:>8.2} {:>7.2} {:>7.2}",
            r.agents,
            100.0 * r.map_mean,
            100.0 * r.map_sem,
            gain
        );
        prev = Some(r.map_mean);
    }
    Ok(())
}
