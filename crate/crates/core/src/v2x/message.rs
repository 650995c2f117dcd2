use serde::{Deserialize, Serialize};

use crate::flow::FlowVector;
use crate::geometry::{AgentId, BoundingBox, LidarPoint, Pose};

/// One detected box with the scene flow pooled over its points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEntry {
    /// Box in the sender's frame at `t_i`.
    pub bbox: BoundingBox,
    /// Pooled flow in the sender's frame at `t_i`.
    pub flow: FlowVector,
}

/// Late-collaboration payload: detections plus the metadata a receiver
/// needs to propagate and re-frame them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMessage {
    pub agent_id: AgentId,
    /// Time the detections were produced, seconds.
    pub t_i: f64,
    /// Sender pose in the global frame at `t_i`.
    pub pose: Pose,
    /// Duration of the sender's input sequence, seconds.
    pub span: f64,
    pub entries: Vec<DetectionEntry>,
}

/// Early-collaboration payload: the sender's motion-compensated sequence,
/// in its own frame at `t_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyMessage {
    pub agent_id: AgentId,
    pub t_i: f64,
    pub pose: Pose,
    pub points: Vec<LidarPoint>,
}
