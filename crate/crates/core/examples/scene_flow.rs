//! Oracle scene flow on a motion-compensated sequence, then the metrics of
//! a simulated imperfect estimator against it.
//!
//! cargo run --example scene_flow -- [SIGMA]

use modar_v2x::flow::{flow_metrics, oracle_flow, perturb_flow, FlowNoiseProfile};
use modar_v2x::geometry::emc_concatenate;
use modar_v2x::scene::{generate_scenario, scan_sequence, sequence_times, snap_time, ScenarioParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.05);
    let world = generate_scenario(&ScenarioParams::default(), 1)?;
    let ego = world.ego();
    let t = snap_time(2.0);
    let poses = sequence_times(world.frame_rate, t, 3)
        .iter()
        .map(|s| ego.pose_at(*s))
        .collect::<Result<Vec<_>, _>>()?;
    let cloud = emc_concatenate(&scan_sequence(&world, ego, t, 3)?, &poses)?;
    let oracle = oracle_flow(&cloud, &world, t)?;
    let moving = oracle.flows.iter().filter(|f| f.norm() > 0.0).count();
    println!(
        "{} points, {} foreground, {moving} with non-zero flow",
        cloud.len(),
        oracle.foreground.iter().filter(|f| **f).count()
    );

    let noise = FlowNoiseProfile {
        sigma,
        ..FlowNoiseProfile::default()
    };
    let estimate = perturb_flow(&oracle.flows, &oracle.foreground, &noise, 7)?;
    let m = flow_metrics(&estimate, &oracle.flows)?;
    println!(
        "sigma {sigma}: EPE {:.4} m, AccS {:.2}%, AccR {:.2}%, ROutliers {:.2}%",
        m.epe, m.acc_s, m.acc_r, m.r_outliers
    );
    Ok(())
}
