//! Encodes a detection message, dumps the bytes, decodes it back and
//! compares wire sizes of late and early payloads.
//!
//! cargo run --example wire_protocol

use modar_v2x::geometry::{BoundingBox, LidarPoint, Pose, Vec3};
use modar_v2x::v2x::{
    decode_detection, detection_size, early_size, encode_detection, hex_dump, DetectionEntry, DetectionMessage,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let msg = DetectionMessage {
        agent_id: 2,
        t_i: 1.4,
        pose: Pose::from_yaw(0.3, Vec3::new(10.0, -4.0, 0.0)),
        span: 0.6,
        entries: vec![
            DetectionEntry {
                bbox: BoundingBox::new(Vec3::new(12.0, 3.5, 0.8), Vec3::new(4.5, 1.9, 1.6), 0.1, 0.92, 0),
                flow: Vec3::new(3.0, 0.2, 0.0),
            },
            DetectionEntry {
                bbox: BoundingBox::new(Vec3::new(-8.0, 1.0, 0.9), Vec3::new(4.4, 1.8, 1.5), -1.5, 0.41, 0),
                flow: Vec3::zeros(),
            },
        ],
    };
    let bytes = encode_detection(&msg)?;
    print!("{}", hex_dump(&bytes));
    let back = decode_detection(&bytes)?;
    println!(
        "{} bytes, {} entries decoded, t_i {}",
        bytes.len(),
        back.entries.len(),
        back.t_i
    );

    let points = [LidarPoint::new(Vec3::new(1.0, 2.0, 0.5), 0.4, 0.0); 3];
    println!(
        "early payload with {} points: {} bytes",
        points.len(),
        early_size(points.len())
    );
    println!(
        "100 boxes: {} bytes; 60000 points: {} bytes",
        detection_size(100),
        early_size(60_000)
    );
    Ok(())
}
