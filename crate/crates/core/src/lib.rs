//! Multi-agent LiDAR collaborative perception simulator: exchanged
//! detections are propagated with scene flow, re-encoded as MoDAR points
//! and fused into the receiver's point cloud.

pub mod acceptance;
pub mod collab;
pub mod detector;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod flow;
pub mod geometry;
pub mod rng;
pub mod scene;
pub mod v2x;

pub use error::{Error, Result};
