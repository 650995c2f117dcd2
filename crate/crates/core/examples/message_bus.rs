//! Latest-prior query semantics of the V2X bus under publication latency.
//!
//! cargo run --example message_bus

use modar_v2x::geometry::{Pose, Vec3};
use modar_v2x::v2x::{DetectionMessage, MessageBus};

fn message(agent_id: u8, t_i: f64) -> DetectionMessage {
    DetectionMessage {
        agent_id,
        t_i,
        pose: Pose::from_translation(Vec3::new(f64::from(agent_id), 0.0, 0.0)),
        span: 0.6,
        entries: Vec::new(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bus = MessageBus::new();
    for k in 0..6 {
        let t_i = 0.2 * f64::from(k);
        bus.publish(message(0, t_i), 0.0)?;
        bus.publish(message(2, t_i), 0.15)?;
    }
    for t in [0.1, 0.4, 0.5, 1.0, 5.0] {
        let got = bus.query(t, 1);
        let seen: Vec<String> = got.iter().map(|(a, m)| format!("agent {a} @ {:.1}", m.t_i)).collect();
        println!("query t = {t:.1}: {}", seen.join(", "));
    }
    Ok(())
}
