//! Collaboration strategies and the MoDAR box-as-point machinery.

mod modar;
mod strategy;

pub use modar::{
    box_to_modar, fuse_modar, modar_to_box, modar_to_ego_frame, pool_box_flow, pool_box_velocity, pooled_flow,
    propagate_modar, Estimator, FusedPoint, LidarFeatures, ModarFeatures, ModarPoint, PointKind, PooledFlow,
};
pub use strategy::{run_strategy, AgentFrame, CollabConfig, Simulation, StrategyId, StrategyOutput};
