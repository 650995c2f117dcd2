//! Ray-casts one scan from every agent and reports how much of the scene
//! each one sees. The elevated roadside unit sees over vehicles.
//!
//! cargo run --example lidar_scan -- [SEED]

use modar_v2x::geometry::point_in_box;
use modar_v2x::scene::{generate_scenario, lidar_scan, snap_time, ScenarioParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let world = generate_scenario(&ScenarioParams::default(), seed)?;
    let t = snap_time(1.0);
    let boxes = world.object_boxes_at(t)?;
    println!("{} objects at t = {t} s", boxes.len());
    println!(
        "{:>5} {:>5} {:>7} {:>8} {:>8}",
        "agent", "kind", "height", "points", "objects"
    );
    for agent in &world.agents {
        let scan = lidar_scan(&world, agent, t)?;
        let global = scan.transformed(&agent.pose_at(t)?, modar_v2x::geometry::Frame::Global);
        let seen = boxes
            .iter()
            .filter(|(_, b)| global.points.iter().any(|p| point_in_box(&p.position, b)))
            .count();
        println!(
            "{:>5} {:>5} {:>7.1} {:>8} {:>8}",
            agent.agent_id,
            format!("{:?}", agent.kind),
            agent.mount_height(),
            scan.len(),
            seen
        );
    }
    Ok(())
}
