//! The six collaboration strategies, run for the ego agent at one query
//! time. Per-agent perception results are memoized per (agent, time) so a
//! frame shared by several strategies is simulated once.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::modar::{
    box_to_modar, fuse_modar, modar_to_box, modar_to_ego_frame, pooled_flow, propagate_modar, Estimator, ModarPoint,
};
use crate::detector::{nms, simulate_detections, NoiseProfile};
use crate::error::{Error, Result};
use crate::flow::{oracle_flow, perturb_flow, FlowNoiseProfile, FlowVector};
use crate::geometry::{emc_concatenate, AgentId, BoundingBox, Frame, LidarPoint, PointCloud, Pose, Vec3};
use crate::rng::{self, sub_seed, Module};
use crate::scene::{
    in_detection_range, lidar_scan, sequence_times, snap_time, visible_ground_truth, AgentConfig, GtMode, World,
};
use crate::v2x::{early_size, encode_detection, DetectionEntry, DetectionMessage, EarlyMessage, MessageBus};

/// Offset separating the ego's union-cloud flow stream from its own
/// per-frame flow stream.
const UNION_FLOW_STREAM: u64 = 0x100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StrategyId {
    None,
    LateSync,
    LateAsync,
    LateAsyncProp,
    Early,
    LateEarly,
}

impl StrategyId {
    pub const ALL: [StrategyId; 6] = [
        StrategyId::None,
        StrategyId::LateSync,
        StrategyId::LateAsync,
        StrategyId::LateAsyncProp,
        StrategyId::Early,
        StrategyId::LateEarly,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyId::None => "NONE",
            StrategyId::LateSync => "LATE_SYNC",
            StrategyId::LateAsync => "LATE_ASYNC",
            StrategyId::LateAsyncProp => "LATE_ASYNC_PROP",
            StrategyId::Early => "EARLY",
            StrategyId::LateEarly => "LATE_EARLY",
        }
    }

    /// Lag between the ego query time and the time other agents produced
    /// what the ego receives.
    pub fn lag(&self, async_lag: f64) -> f64 {
        match self {
            StrategyId::None | StrategyId::LateSync => 0.0,
            _ => async_lag,
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.to_ascii_uppercase().replace('-', "_");
        StrategyId::ALL
            .into_iter()
            .find(|id| id.as_str() == upper)
            .ok_or_else(|| Error::contract(format!("unknown strategy '{s}'")))
    }
}

/// Knobs shared by every strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollabConfig {
    /// Scans per input sequence.
    pub sequence_length: usize,
    /// Age of the messages the ego receives under the asynchronous
    /// strategies, seconds.
    pub async_lag: f64,
    /// Transmission delay before a published message becomes queryable.
    pub latency: f64,
    pub estimator: Estimator,
    pub nms_iou: f64,
    /// Margin added on every side of a detected box when pooling its flow,
    /// metres. LiDAR returns sit on object faces, so an unpadded noisy box
    /// can miss all of them.
    pub pool_margin: f64,
    pub flow_noise: FlowNoiseProfile,
    /// Detector profiles by name; agents refer to them by `profile`.
    pub profiles: BTreeMap<String, NoiseProfile>,
    /// Number of roster agents taking part, ego included. `None` = all.
    pub agent_count: Option<usize>,
}

impl Default for CollabConfig {
    fn default() -> Self {
        let profiles = [NoiseProfile::profile_p(), NoiseProfile::profile_s()]
            .into_iter()
            .map(|p| (p.name.clone(), p))
            .collect();
        Self {
            sequence_length: 3,
            async_lag: 0.2,
            latency: 0.0,
            estimator: Estimator::LagWeighted,
            nms_iou: 0.2,
            pool_margin: 0.5,
            flow_noise: FlowNoiseProfile::default(),
            profiles,
            agent_count: None,
        }
    }
}

impl CollabConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sequence_length == 0 {
            return Err(Error::contract("sequence_length must be at least 1"));
        }
        if !(self.async_lag >= 0.0 && self.async_lag.is_finite()) {
            return Err(Error::contract("async lag must be finite and >= 0"));
        }
        if !(self.latency >= 0.0 && self.latency.is_finite()) {
            return Err(Error::contract("latency must be finite and >= 0"));
        }
        if !(self.nms_iou > 0.0 && self.nms_iou < 1.0) {
            return Err(Error::contract("nms_iou must lie in (0, 1)"));
        }
        if !(self.pool_margin >= 0.0 && self.pool_margin.is_finite()) {
            return Err(Error::contract("pool_margin must be finite and >= 0"));
        }
        if self.agent_count == Some(0) {
            return Err(Error::contract("agent_count must be at least 1"));
        }
        self.flow_noise.validate()?;
        for (name, p) in &self.profiles {
            if name != &p.name {
                return Err(Error::contract(format!(
                    "profile key '{name}' differs from its name '{}'",
                    p.name
                )));
            }
            p.validate()?;
        }
        Ok(())
    }

    pub fn profile(&self, name: &str) -> Result<&NoiseProfile> {
        self.profiles
            .get(name)
            .ok_or_else(|| Error::contract(format!("no detector profile named '{name}'")))
    }

    /// Duration of an input sequence, seconds.
    pub fn span(&self, frame_rate: f64) -> f64 {
        self.sequence_length as f64 / frame_rate
    }
}

/// One agent's perception state at one production time, in its own frame.
#[derive(Debug, Clone)]
pub struct AgentFrame {
    pub agent_id: AgentId,
    pub t: f64,
    /// Global sensor pose at `t`.
    pub pose: Pose,
    /// Motion-compensated sequence before flow rectification.
    pub raw: PointCloud,
    /// Estimated per-point flow, aligned with `raw`.
    pub flows: Vec<FlowVector>,
    /// `raw` shifted by `flows`.
    pub rectified: PointCloud,
    pub detections: Vec<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutput {
    /// Ego-frame boxes at the query time.
    pub detections: Vec<BoundingBox>,
    pub bytes_exchanged: usize,
    pub per_agent_bytes: BTreeMap<AgentId, usize>,
}

fn rectify(raw: &PointCloud, flows: &[FlowVector]) -> PointCloud {
    PointCloud {
        points: raw
            .points
            .iter()
            .zip(flows)
            .map(|(p, f)| LidarPoint {
                position: p.position + f,
                ..*p
            })
            .collect(),
        frame: raw.frame,
        timestamp: raw.timestamp,
    }
}

/// Memoizing driver for one (world, config, seed).
pub struct Simulation<'a> {
    world: &'a World,
    config: &'a CollabConfig,
    seed: u64,
    scans: RefCell<HashMap<(AgentId, i64), Arc<PointCloud>>>,
    frames: RefCell<HashMap<(AgentId, i64), Arc<AgentFrame>>>,
}

impl<'a> Simulation<'a> {
    pub fn new(world: &'a World, config: &'a CollabConfig, seed: u64) -> Result<Self> {
        world.validate()?;
        config.validate()?;
        for a in &world.agents {
            config.profile(&a.profile)?;
        }
        Ok(Self {
            world,
            config,
            seed,
            scans: RefCell::new(HashMap::new()),
            frames: RefCell::new(HashMap::new()),
        })
    }

    pub fn world(&self) -> &World {
        self.world
    }

    pub fn config(&self) -> &CollabConfig {
        self.config
    }

    /// Agents taking part: the ego, then the rest of the roster in order,
    /// truncated to `agent_count`.
    pub fn participants(&self) -> Vec<&'a AgentConfig> {
        let ego = self.world.ego();
        let n = self.config.agent_count.unwrap_or(usize::MAX);
        std::iter::once(ego)
            .chain(self.world.agents.iter().filter(|a| a.agent_id != ego.agent_id))
            .take(n)
            .collect()
    }

    /// Earliest time at which a full input sequence exists.
    pub fn earliest_time(&self) -> f64 {
        (self.config.sequence_length - 1) as f64 / self.world.frame_rate
    }

    fn agent(&self, id: AgentId) -> Result<&'a AgentConfig> {
        self.world
            .agent(id)
            .ok_or_else(|| Error::contract(format!("unknown agent {id}")))
    }

    /// Single scan of `agent` at `t`, in its frame.
    pub fn scan(&self, agent: AgentId, t: f64) -> Result<Arc<PointCloud>> {
        let key = (agent, rng::tick(t));
        if let Some(c) = self.scans.borrow().get(&key) {
            return Ok(Arc::clone(c));
        }
        let cloud = Arc::new(lidar_scan(self.world, self.agent(agent)?, snap_time(t))?);
        self.scans.borrow_mut().insert(key, Arc::clone(&cloud));
        Ok(cloud)
    }

    /// Perception state of `agent` at production time `t`.
    pub fn agent_frame(&self, agent: AgentId, t: f64) -> Result<Arc<AgentFrame>> {
        let t = snap_time(t);
        let key = (agent, rng::tick(t));
        if let Some(f) = self.frames.borrow().get(&key) {
            return Ok(Arc::clone(f));
        }
        let frame = Arc::new(self.compute_frame(agent, t)?);
        self.frames.borrow_mut().insert(key, Arc::clone(&frame));
        Ok(frame)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let start = self.earliest_time();
        if t < start - 1e-9 || t > self.world.duration + 1e-9 {
            return Err(Error::OutOfRange {
                t,
                start,
                end: self.world.duration,
            });
        }
        Ok(())
    }

    fn compute_frame(&self, agent_id: AgentId, t: f64) -> Result<AgentFrame> {
        self.check_time(t)?;
        let agent = self.agent(agent_id)?;
        let times = sequence_times(self.world.frame_rate, t, self.config.sequence_length);
        let scans = times
            .iter()
            .map(|ts| self.scan(agent_id, *ts).map(|c| (*c).clone()))
            .collect::<Result<Vec<_>>>()?;
        let poses = times.iter().map(|ts| agent.pose_at(*ts)).collect::<Result<Vec<_>>>()?;
        let global = emc_concatenate(&scans, &poses)?;
        let tick = rng::tick(t);
        let oracle = oracle_flow(&global, self.world, t)?;
        let noisy = perturb_flow(
            &oracle.flows,
            &oracle.foreground,
            &self.config.flow_noise,
            sub_seed(self.seed, Module::Flow, agent_id as u64, tick),
        )?;
        let pose = agent.pose_at(t)?;
        let to_agent = pose.inverse();
        let raw = global.transformed(&to_agent, Frame::Agent(agent_id));
        let flows: Vec<FlowVector> = noisy.iter().map(|f| to_agent.transform_vector(f)).collect();
        let rectified = rectify(&raw, &flows);
        let detections = simulate_detections(
            &rectified,
            self.world,
            t,
            self.config.profile(&agent.profile)?,
            sub_seed(self.seed, Module::Detector, agent_id as u64, tick),
            None,
        )?;
        Ok(AgentFrame {
            agent_id,
            t,
            pose,
            raw,
            flows,
            rectified,
            detections,
        })
    }

    /// Late-collaboration message an agent sends for `frame`. Flow is
    /// pooled over the rectified sequence, keeping each point's lag, inside
    /// each box grown by `pool_margin`.
    pub fn detection_message(&self, frame: &AgentFrame) -> Result<DetectionMessage> {
        let span = self.config.span(self.world.frame_rate);
        let entries = frame
            .detections
            .iter()
            .map(|b| {
                let region = BoundingBox {
                    size: b.size + Vec3::repeat(2.0 * self.config.pool_margin),
                    ..*b
                };
                let pooled = pooled_flow(self.config.estimator, &region, &frame.rectified, &frame.flows, span)?;
                Ok(DetectionEntry {
                    bbox: *b,
                    flow: pooled.flow,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DetectionMessage {
            agent_id: frame.agent_id,
            t_i: frame.t,
            pose: frame.pose,
            span,
            entries,
        })
    }

    /// Early-collaboration message: the unrectified sequence.
    pub fn early_message(&self, frame: &AgentFrame) -> EarlyMessage {
        EarlyMessage {
            agent_id: frame.agent_id,
            t_i: frame.t,
            pose: frame.pose,
            points: frame.raw.points.clone(),
        }
    }

    /// Ground truth at `t` in the ego frame, filtered by visibility in the
    /// single scans of every world agent.
    pub fn ground_truth(&self, t: f64, mode: GtMode) -> Result<Vec<BoundingBox>> {
        let t = snap_time(t);
        let mut clouds = BTreeMap::new();
        for a in &self.world.agents {
            if mode == GtMode::EgoOnly && a.kind != crate::scene::AgentKind::Ego {
                continue;
            }
            let scan = self.scan(a.agent_id, t)?;
            clouds.insert(a.agent_id, scan.transformed(&a.pose_at(t)?, Frame::Global));
        }
        visible_ground_truth(self.world, t, &clouds, mode)
    }

    fn received_detections(
        &self,
        t: f64,
        lag: f64,
    ) -> Result<(BTreeMap<AgentId, Arc<DetectionMessage>>, BTreeMap<AgentId, usize>)> {
        let ego = self.world.ego().agent_id;
        let bus = MessageBus::new();
        let t_i = snap_time(t - lag);
        for a in self.participants().into_iter().filter(|a| a.agent_id != ego) {
            let frame = self.agent_frame(a.agent_id, t_i)?;
            bus.publish(self.detection_message(&frame)?, self.config.latency)?;
        }
        let received = bus.query(t + 1e-9, ego);
        let bytes = received
            .iter()
            .map(|(id, m)| Ok((*id, encode_detection(m)?.len())))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok((received, bytes))
    }

    /// Received boxes as MoDAR points in the ego frame at `t`.
    fn received_modars(
        &self,
        received: &BTreeMap<AgentId, Arc<DetectionMessage>>,
        t: f64,
        ego_pose: &Pose,
        propagate: bool,
    ) -> Result<Vec<ModarPoint>> {
        let mut out = Vec::new();
        for msg in received.values() {
            for e in &msg.entries {
                let mut m = box_to_modar(&e.bbox, e.flow, msg.agent_id, msg.t_i);
                if propagate {
                    m = propagate_modar(&m, t, msg.span)?;
                }
                out.push(modar_to_ego_frame(&m, &msg.pose, ego_pose));
            }
        }
        Ok(out)
    }

    fn run_early(&self, ego: &AgentFrame, t: f64, lag: f64) -> Result<(Vec<BoundingBox>, BTreeMap<AgentId, usize>)> {
        let bus = MessageBus::new();
        let t_i = snap_time(t - lag);
        for a in self.participants().into_iter().filter(|a| a.agent_id != ego.agent_id) {
            let frame = self.agent_frame(a.agent_id, t_i)?;
            bus.publish(self.early_message(&frame), self.config.latency)?;
        }
        let received = bus.query(t + 1e-9, ego.agent_id);
        let mut union = ego.raw.transformed(&ego.pose, Frame::Global);
        let mut bytes = BTreeMap::new();
        for (id, msg) in &received {
            bytes.insert(*id, early_size(msg.points.len()));
            let extra = t - msg.t_i;
            union.points.extend(msg.points.iter().map(|p| LidarPoint {
                position: msg.pose.transform_point(&p.position),
                intensity: p.intensity,
                time_lag: p.time_lag + extra,
            }));
        }
        let tick = rng::tick(t);
        let oracle = oracle_flow(&union, self.world, t)?;
        let noisy = perturb_flow(
            &oracle.flows,
            &oracle.foreground,
            &self.config.flow_noise,
            sub_seed(self.seed, Module::Flow, UNION_FLOW_STREAM + ego.agent_id as u64, tick),
        )?;
        let to_ego = ego.pose.inverse();
        let raw = union.transformed(&to_ego, Frame::Agent(ego.agent_id));
        let flows: Vec<FlowVector> = noisy.iter().map(|f| to_ego.transform_vector(f)).collect();
        let dets = simulate_detections(
            &rectify(&raw, &flows),
            self.world,
            t,
            self.config.profile(&self.world.ego().profile)?,
            sub_seed(self.seed, Module::Detector, ego.agent_id as u64, tick),
            None,
        )?;
        Ok((dets, bytes))
    }

    /// Runs `strategy` for the ego at query time `t`.
    pub fn run(&self, strategy: StrategyId, t: f64) -> Result<StrategyOutput> {
        let t = snap_time(t);
        let lag = strategy.lag(self.config.async_lag);
        self.check_time(t - lag)?;
        let ego_id = self.world.ego().agent_id;
        let ego = self.agent_frame(ego_id, t)?;
        let (detections, per_agent_bytes) = match strategy {
            StrategyId::None => (ego.detections.clone(), BTreeMap::new()),
            StrategyId::LateSync | StrategyId::LateAsync | StrategyId::LateAsyncProp => {
                let (received, bytes) = self.received_detections(t, lag)?;
                let propagate = strategy == StrategyId::LateAsyncProp;
                let mut all = ego.detections.clone();
                all.extend(
                    self.received_modars(&received, t, &ego.pose, propagate)?
                        .iter()
                        .map(modar_to_box),
                );
                (nms(&all, self.config.nms_iou)?, bytes)
            }
            StrategyId::LateEarly => {
                let (received, bytes) = self.received_detections(t, lag)?;
                let modars = self.received_modars(&received, t, &ego.pose, true)?;
                let fused = fuse_modar(&ego.rectified, &modars);
                debug_assert_eq!(fused.len(), ego.rectified.len() + modars.len());
                let dets = simulate_detections(
                    &ego.rectified,
                    self.world,
                    t,
                    self.config.profile(&self.world.ego().profile)?,
                    sub_seed(self.seed, Module::Detector, ego_id as u64, rng::tick(t)),
                    Some(&modars),
                )?;
                (dets, bytes)
            }
            StrategyId::Early => self.run_early(&ego, t, lag)?,
        };
        let detections = detections
            .into_iter()
            .filter(|b| in_detection_range(&b.center))
            .collect();
        Ok(StrategyOutput {
            detections,
            bytes_exchanged: per_agent_bytes.values().sum(),
            per_agent_bytes,
        })
    }
}

/// One-shot convenience wrapper around [`Simulation::run`].
pub fn run_strategy(
    strategy: StrategyId,
    world: &World,
    t: f64,
    config: &CollabConfig,
    seed: u64,
) -> Result<StrategyOutput> {
    Simulation::new(world, config, seed)?.run(strategy, t)
}
