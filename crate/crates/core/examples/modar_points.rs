//! A collaborator's detection as a MoDAR point: pooled flow, propagation
//! to the ego's query time, transfer into the ego frame and fusion with
//! the ego cloud.
//!
//! cargo run --example modar_points

use modar_v2x::collab::{box_to_modar, fuse_modar, modar_to_ego_frame, propagate_modar, CollabConfig, Simulation};
use modar_v2x::scene::{generate_scenario, snap_time, ScenarioParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = generate_scenario(&ScenarioParams::default(), 1)?;
    let config = CollabConfig::default();
    let sim = Simulation::new(&world, &config, 1)?;
    let t = snap_time(2.0);
    let t_i = snap_time(t - config.async_lag);
    let ego = world.ego();
    let sender = sim.participants()[1];
    let sender_frame = sim.agent_frame(sender.agent_id, t_i)?;
    let msg = sim.detection_message(&sender_frame)?;
    println!(
        "agent {} sent {} boxes at {t_i} s (span {} s)",
        msg.agent_id,
        msg.entries.len(),
        msg.span
    );

    let pose_ego = ego.pose_at(t)?;
    let mut modars = Vec::new();
    for e in msg.entries.iter().take(5) {
        let m = box_to_modar(&e.bbox, e.flow, msg.agent_id, msg.t_i);
        let p = propagate_modar(&m, t, msg.span)?;
        let in_ego = modar_to_ego_frame(&p, &msg.pose, &pose_ego);
        println!(
            "  score {:.2} flow ({:+.2}, {:+.2}) moved {:.3} m, ego frame ({:.1}, {:.1})",
            m.feat_score,
            e.flow.x,
            e.flow.y,
            (p.position - m.position).norm(),
            in_ego.position.x,
            in_ego.position.y
        );
        modars.push(in_ego);
    }
    let frame = sim.agent_frame(ego.agent_id, t)?;
    let fused = fuse_modar(&frame.raw, &modars);
    println!(
        "fused cloud: {} points, last row {:?}",
        fused.len(),
        fused.last().map(|f| f.feature_row())
    );
    Ok(())
}
