//! Concatenates the ego's last three scans into the global frame, then
//! rectifies every object point onto its object's current pose.
//!
//! cargo run --example ego_motion_compensation -- [SEED]

use modar_v2x::geometry::{emc_concatenate, point_in_box, rectify_point};
use modar_v2x::scene::{generate_scenario, scan_sequence, sequence_times, snap_time, ScenarioParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let world = generate_scenario(&ScenarioParams::default(), seed)?;
    let ego = world.ego();
    let t = snap_time(2.0);
    let times = sequence_times(world.frame_rate, t, 3);
    let scans = scan_sequence(&world, ego, t, 3)?;
    let poses = times.iter().map(|s| ego.pose_at(*s)).collect::<Result<Vec<_>, _>>()?;
    let cloud = emc_concatenate(&scans, &poses)?;
    println!("scan times {times:?}, {} points in the global frame", cloud.len());

    let (mut object_points, mut moved, mut max_shift) = (0usize, 0usize, 0.0f64);
    for p in &cloud.points {
        let source = snap_time(t - p.time_lag);
        for tr in &world.trajectories {
            if point_in_box(&p.position, &tr.box_at(source)?) {
                let x = rectify_point(&p.position, &tr.pose_at(source)?, &tr.pose_at(t)?);
                let shift = (x - p.position).norm();
                object_points += 1;
                moved += usize::from(shift > 1e-9);
                max_shift = max_shift.max(shift);
                break;
            }
        }
    }
    println!("{object_points} object points, {moved} moved by rectification, largest shift {max_shift:.3} m");
    Ok(())
}
