//! Synthetic intersection worlds, analytic trajectories and a ray-cast LiDAR.
//!
//! The map is a four-way intersection centred on the global origin: one road
//! along x, one along y, each `2 * road_half_width` wide with right-hand
//! traffic. Objects and agents are placed relative to that layout.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    bev_iou, normalize_angle, point_in_box, AgentId, BoundingBox, Frame, LidarPoint, PointCloud, Pose, Vec3,
};
use crate::rng::{self, Module};

/// Half-width of the ego-centred square in which detection and evaluation happen.
pub const DETECTION_RANGE: f64 = 51.2;

const MAX_YAW_RATE: f64 = 1.5;
const TIME_TOL: f64 = 1e-9;
/// Extra length and width kept free around every body, metres.
const CLEARANCE: f64 = 1.2;
const PLACEMENT_RETRIES: usize = 500;

pub const CLASS_VEHICLE: u8 = 0;
pub const CLASS_SMALL: u8 = 1;

/// Quantizes a time onto the microsecond grid used for scan timestamps.
pub fn snap_time(t: f64) -> f64 {
    rng::tick(t) as f64 / 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Motion {
    Static,
    ConstantVelocity {
        velocity: [f64; 2],
    },
    /// Circular arc at constant speed; positive yaw rate turns left.
    ConstantTurn {
        speed: f64,
        yaw_rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub object_id: u32,
    pub class_id: u8,
    /// Box extents `(w, l, h)`; `w` runs along the heading.
    pub size: Vec3,
    pub motion: Motion,
    pub initial: Pose,
    pub t0: f64,
    pub t1: f64,
}

impl Trajectory {
    pub fn new(
        object_id: u32,
        class_id: u8,
        size: Vec3,
        motion: Motion,
        initial: Pose,
        t0: f64,
        t1: f64,
    ) -> Result<Self> {
        if let Motion::ConstantTurn { speed, yaw_rate } = motion {
            if speed < 0.0 || yaw_rate.abs() > MAX_YAW_RATE {
                return Err(Error::contract(format!(
                    "turn speed {speed} / yaw rate {yaw_rate} out of bounds"
                )));
            }
        }
        if t1 < t0 {
            return Err(Error::contract("trajectory interval is reversed"));
        }
        Ok(Self {
            object_id,
            class_id,
            size,
            motion,
            initial,
            t0,
            t1,
        })
    }

    pub fn is_static(&self) -> bool {
        matches!(self.motion, Motion::Static)
    }

    /// Closed-form pose at `t`.
    pub fn pose_at(&self, t: f64) -> Result<Pose> {
        if !(t >= self.t0 - TIME_TOL && t <= self.t1 + TIME_TOL) {
            return Err(Error::OutOfRange {
                t,
                start: self.t0,
                end: self.t1,
            });
        }
        let dt = t - self.t0;
        Ok(match self.motion {
            Motion::Static => self.initial,
            Motion::ConstantVelocity { velocity } => Pose {
                rotation: self.initial.rotation,
                translation: self.initial.translation + Vec3::new(velocity[0], velocity[1], 0.0) * dt,
            },
            Motion::ConstantTurn { speed, yaw_rate } => {
                let heading0 = self.initial.yaw();
                let offset = if yaw_rate.abs() < 1e-12 {
                    Vec3::new(heading0.cos(), heading0.sin(), 0.0) * (speed * dt)
                } else {
                    let radius = speed / yaw_rate;
                    let heading = heading0 + yaw_rate * dt;
                    Vec3::new(
                        radius * (heading.sin() - heading0.sin()),
                        radius * (heading0.cos() - heading.cos()),
                        0.0,
                    )
                };
                let turn = Pose::from_yaw(yaw_rate * dt, Vec3::zeros());
                Pose {
                    rotation: turn.rotation * self.initial.rotation,
                    translation: self.initial.translation + offset,
                }
            }
        })
    }

    pub fn box_at(&self, t: f64) -> Result<BoundingBox> {
        let pose = self.pose_at(t)?;
        Ok(BoundingBox::new(
            pose.translation,
            self.size,
            pose.yaw(),
            1.0,
            self.class_id,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarSpec {
    pub beams: usize,
    pub azimuth_bins: usize,
    pub max_range: f64,
    /// `(min, max)` elevation in radians.
    pub vertical_fov: (f64, f64),
}

impl Default for LidarSpec {
    fn default() -> Self {
        Self {
            beams: 32,
            azimuth_bins: 1024,
            max_range: 100.0,
            vertical_fov: ((-30.0f64).to_radians(), 10.0f64.to_radians()),
        }
    }
}

impl LidarSpec {
    pub fn validate(&self) -> Result<()> {
        if self.beams < 1 || self.azimuth_bins < 4 || self.max_range <= 0.0 {
            return Err(Error::contract(
                "lidar needs beams >= 1, azimuth_bins >= 4, max_range > 0",
            ));
        }
        if self.vertical_fov.0 > self.vertical_fov.1 {
            return Err(Error::contract("vertical fov min exceeds max"));
        }
        Ok(())
    }

    fn beam_elevations(&self) -> Vec<f64> {
        let (lo, hi) = self.vertical_fov;
        if self.beams == 1 {
            return vec![(lo + hi) / 2.0];
        }
        (0..self.beams)
            .map(|i| lo + (hi - lo) * i as f64 / (self.beams - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Irsu,
    Cav,
    Ego,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// 0 = IRSU, 1 = ego, 2..=5 = other connected vehicles.
    pub agent_id: AgentId,
    pub kind: AgentKind,
    /// Sensor pose over time; the agent frame is the sensor frame.
    pub trajectory: Trajectory,
    pub lidar: LidarSpec,
    pub detection_rate: f64,
    /// Name of the detector noise profile this agent runs.
    pub profile: String,
}

impl AgentConfig {
    pub fn pose_at(&self, t: f64) -> Result<Pose> {
        self.trajectory.pose_at(t)
    }

    pub fn mount_height(&self) -> f64 {
        self.trajectory.initial.translation.z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub trajectories: Vec<Trajectory>,
    pub agents: Vec<AgentConfig>,
    pub frame_rate: f64,
    pub duration: f64,
}

impl World {
    pub fn validate(&self) -> Result<()> {
        let egos = self.agents.iter().filter(|a| a.kind == AgentKind::Ego).count();
        if egos != 1 {
            return Err(Error::contract(format!("world needs exactly one ego, found {egos}")));
        }
        let mut ids: Vec<_> = self.agents.iter().map(|a| a.agent_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("duplicate agent id"));
        }
        let mut obj: Vec<_> = self.trajectories.iter().map(|t| t.object_id).collect();
        obj.sort_unstable();
        if obj.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("duplicate object id"));
        }
        if self.frame_rate <= 0.0 {
            return Err(Error::contract("frame rate must be positive"));
        }
        let vehicle_height = self
            .agents
            .iter()
            .filter(|a| a.kind != AgentKind::Irsu)
            .map(AgentConfig::mount_height)
            .fold(f64::MIN, f64::max);
        for a in &self.agents {
            a.lidar.validate()?;
            if a.detection_rate <= 0.0 {
                return Err(Error::contract("detection rate must be positive"));
            }
            if a.kind == AgentKind::Irsu && a.mount_height() <= vehicle_height {
                return Err(Error::contract("IRSU must be mounted above every vehicle sensor"));
            }
        }
        Ok(())
    }

    pub fn ego(&self) -> &AgentConfig {
        self.agents
            .iter()
            .find(|a| a.kind == AgentKind::Ego)
            .expect("validated world has an ego agent")
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentConfig> {
        self.agents.iter().find(|a| a.agent_id == id)
    }

    /// Ground-truth boxes of every object at `t`, in the global frame.
    pub fn object_boxes_at(&self, t: f64) -> Result<Vec<(u32, BoundingBox)>> {
        self.trajectories
            .iter()
            .map(|tr| Ok((tr.object_id, tr.box_at(t)?)))
            .collect()
    }

    pub fn trajectory(&self, object_id: u32) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.object_id == object_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub object_count: usize,
    /// Fraction of objects that move; rounded to a whole count.
    pub dynamic_fraction: f64,
    /// Fraction of the moving objects that follow circular arcs.
    pub turning_fraction: f64,
    /// Fraction of objects of the small class (pedestrian-sized).
    pub small_object_fraction: f64,
    /// Fraction of vehicles that are large (truck / bus sized).
    pub large_vehicle_fraction: f64,
    pub speed_range: (f64, f64),
    /// Half-size of the square map, metres.
    pub extent: f64,
    pub road_half_width: f64,
    pub agent_count: usize,
    pub frame_rate: f64,
    pub frames: usize,
    pub irsu_height: f64,
    pub vehicle_sensor_height: f64,
    pub ego_speed: f64,
    pub lidar: LidarSpec,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            object_count: 40,
            dynamic_fraction: 0.4,
            turning_fraction: 0.2,
            small_object_fraction: 0.0,
            large_vehicle_fraction: 0.15,
            speed_range: (4.0, 10.0),
            extent: 60.0,
            road_half_width: 7.0,
            agent_count: 6,
            frame_rate: 5.0,
            frames: 16,
            irsu_height: 6.0,
            vehicle_sensor_height: 1.9,
            ego_speed: 4.0,
            lidar: LidarSpec::default(),
        }
    }
}

impl ScenarioParams {
    pub fn duration(&self) -> f64 {
        self.frames.saturating_sub(1).max(1) as f64 / self.frame_rate
    }

    pub fn validate(&self) -> Result<()> {
        let fractions = [
            self.dynamic_fraction,
            self.turning_fraction,
            self.small_object_fraction,
            self.large_vehicle_fraction,
        ];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::contract("fractions must lie in [0, 1]"));
        }
        if !(1..=6).contains(&self.agent_count) {
            return Err(Error::contract("agent_count must be between 1 and 6"));
        }
        if self.speed_range.0 < 0.0 || self.speed_range.1 < self.speed_range.0 {
            return Err(Error::contract("speed_range must satisfy 0 <= min <= max"));
        }
        if self.frame_rate <= 0.0 || self.extent <= 0.0 || self.frames == 0 {
            return Err(Error::contract("frame_rate, extent and frames must be positive"));
        }
        if self.irsu_height <= self.vehicle_sensor_height {
            return Err(Error::contract("irsu_height must exceed vehicle_sensor_height"));
        }
        self.lidar.validate()
    }
}

fn lane_centers(road_half_width: f64) -> [f64; 2] {
    let lane = road_half_width / 2.0;
    [lane / 2.0, lane * 1.5]
}

/// Heading of traffic on a lane: road along x (`axis = 0`) or y, on the
/// positive or negative side of the road centre line.
fn lane_heading(axis: usize, positive_side: bool) -> f64 {
    match (axis, positive_side) {
        (0, false) => 0.0,
        (0, true) => PI,
        (_, true) => FRAC_PI_2,
        (_, false) => -FRAC_PI_2,
    }
}

fn lane_point(axis: usize, along: f64, lateral: f64) -> (f64, f64) {
    if axis == 0 {
        (along, lateral)
    } else {
        (lateral, along)
    }
}

fn sample_size<R: Rng>(rng: &mut R, class_id: u8, large: bool) -> Vec3 {
    if class_id == CLASS_SMALL {
        return Vec3::new(
            rng.random_range(0.6..0.9),
            rng.random_range(0.6..0.9),
            rng.random_range(1.5..1.9),
        );
    }
    if large {
        Vec3::new(
            rng.random_range(7.0..10.0),
            rng.random_range(2.4..2.6),
            rng.random_range(3.0..3.6),
        )
    } else {
        Vec3::new(
            rng.random_range(3.9..5.0),
            rng.random_range(1.7..2.0),
            rng.random_range(1.4..1.9),
        )
    }
}

fn footprint(x: f64, y: f64, yaw: f64, size: Vec3) -> BoundingBox {
    BoundingBox::new(Vec3::new(x, y, size.z / 2.0), size, yaw, 1.0, 0)
}

/// Builds a deterministic intersection world for `(cfg, seed)`.
pub fn generate_scenario(cfg: &ScenarioParams, seed: u64) -> Result<World> {
    cfg.validate()?;
    let mut rng = rng::stream(seed, Module::Scenario, 0, 0, 0);
    let duration = cfg.duration();
    let mid = duration / 2.0;
    let lanes = lane_centers(cfg.road_half_width);

    let agents = place_agents(cfg, &mut rng, duration)?;
    let times: Vec<f64> = (0..cfg.frames).map(|k| snap_time(k as f64 / cfg.frame_rate)).collect();
    // Footprints of everything placed so far at every frame time, so no two
    // bodies ever overlap during the run.
    let sweep = |tr: &Trajectory| -> Result<Vec<BoundingBox>> {
        times
            .iter()
            .map(|t| {
                let p = tr.pose_at(*t)?;
                Ok(footprint(
                    p.translation.x,
                    p.translation.y,
                    p.yaw(),
                    tr.size + Vec3::new(CLEARANCE, CLEARANCE, 0.0),
                ))
            })
            .collect()
    };
    let mut occupied: Vec<Vec<BoundingBox>> = agents
        .iter()
        .map(|a| {
            let p = a.trajectory.initial;
            let body = footprint(p.translation.x, p.translation.y, p.yaw(), Vec3::new(4.8, 2.0, 1.6));
            let tr = Trajectory {
                size: body.size,
                ..a.trajectory.clone()
            };
            sweep(&tr)
        })
        .collect::<Result<_>>()?;

    let dynamic_count = (cfg.dynamic_fraction * cfg.object_count as f64).round() as usize;
    let turning_count = (cfg.turning_fraction * dynamic_count as f64).round() as usize;
    let mut trajectories = Vec::with_capacity(cfg.object_count);

    for idx in 0..cfg.object_count {
        let object_id = idx as u32;
        let class_id = if rng.random_bool(cfg.small_object_fraction) {
            CLASS_SMALL
        } else {
            CLASS_VEHICLE
        };
        let large = class_id == CLASS_VEHICLE && rng.random_bool(cfg.large_vehicle_fraction);
        let size = sample_size(&mut rng, class_id, large);
        let dynamic = idx < dynamic_count;
        let turning = dynamic && idx < turning_count;

        let mut placed = None;
        for _ in 0..PLACEMENT_RETRIES {
            let (initial, motion) = if dynamic {
                propose_moving(cfg, &mut rng, &lanes, size, turning, mid)
            } else {
                propose_static(cfg, &mut rng, size)
            };
            let tr = Trajectory::new(object_id, class_id, size, motion, initial, 0.0, duration)?;
            let path = sweep(&tr)?;
            let free = occupied
                .iter()
                .all(|o| o.iter().zip(&path).all(|(a, b)| bev_iou(a, b) == 0.0));
            if free {
                placed = Some((tr, path));
                break;
            }
        }
        let Some((tr, path)) = placed else {
            return Err(Error::Generation(format!(
                "could not place object {object_id} after {PLACEMENT_RETRIES} attempts"
            )));
        };
        occupied.push(path);
        trajectories.push(tr);
    }

    let world = World {
        trajectories,
        agents,
        frame_rate: cfg.frame_rate,
        duration,
    };
    world.validate()?;
    Ok(world)
}

fn propose_moving<R: Rng>(
    cfg: &ScenarioParams,
    rng: &mut R,
    lanes: &[f64; 2],
    size: Vec3,
    turning: bool,
    mid: f64,
) -> (Pose, Motion) {
    let axis = rng.random_range(0..2usize);
    let positive_side = rng.random_bool(0.5);
    let lateral = lanes[rng.random_range(0..2usize)] * if positive_side { 1.0 } else { -1.0 };
    let heading = lane_heading(axis, positive_side);
    let speed = rng.random_range(cfg.speed_range.0..=cfg.speed_range.1);
    let z = size.z / 2.0;
    if turning {
        let along = rng.random_range(-cfg.extent * 0.6..cfg.extent * 0.6);
        let (x, y) = lane_point(axis, along, lateral);
        let radius = rng.random_range(10.0..20.0f64).max(speed / MAX_YAW_RATE);
        let yaw_rate = if rng.random_bool(0.5) {
            speed / radius
        } else {
            -speed / radius
        };
        let initial = Pose::from_yaw(heading, Vec3::new(x, y, z));
        (initial, Motion::ConstantTurn { speed, yaw_rate })
    } else {
        // Sample where the object is half-way through the run, then back
        // out its start so the scene stays populated for the whole window.
        let along_mid = rng.random_range(-cfg.extent..cfg.extent);
        let (mx, my) = lane_point(axis, along_mid, lateral);
        let v = [speed * heading.cos(), speed * heading.sin()];
        let (x, y) = (mx - v[0] * mid, my - v[1] * mid);
        let initial = Pose::from_yaw(heading, Vec3::new(x, y, z));
        (initial, Motion::ConstantVelocity { velocity: v })
    }
}

fn propose_static<R: Rng>(cfg: &ScenarioParams, rng: &mut R, size: Vec3) -> (Pose, Motion) {
    let z = size.z / 2.0;
    if rng.random_bool(0.5) {
        // Parked along a curb.
        let axis = rng.random_range(0..2usize);
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let lateral = side * (cfg.road_half_width + 0.3 + size.y / 2.0);
        let min_along = cfg.road_half_width + size.x / 2.0 + 1.0;
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let along = sign * rng.random_range(min_along..cfg.extent.max(min_along + 1.0));
        let (x, y) = lane_point(axis, along, lateral);
        let yaw = if axis == 0 { 0.0 } else { FRAC_PI_2 };
        (Pose::from_yaw(yaw, Vec3::new(x, y, z)), Motion::Static)
    } else {
        // Off-road lots in the four quadrants.
        let lo = cfg.road_half_width + 3.0;
        let x = rng.random_range(lo..cfg.extent) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let y = rng.random_range(lo..cfg.extent) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let yaw = normalize_angle(rng.random_range(0.0..TAU));
        (Pose::from_yaw(yaw, Vec3::new(x, y, z)), Motion::Static)
    }
}

fn place_agents<R: Rng>(cfg: &ScenarioParams, rng: &mut R, duration: f64) -> Result<Vec<AgentConfig>> {
    let lanes = lane_centers(cfg.road_half_width);
    let mid = duration / 2.0;
    let h = cfg.vehicle_sensor_height;
    let vehicle_size = Vec3::new(4.6, 1.9, 1.6);
    let mut agents = Vec::new();

    let moving = |id: AgentId, kind: AgentKind, axis: usize, positive: bool, lane: f64, along_mid: f64, speed: f64| {
        // Keep the whole run inside the map.
        let reach = (cfg.extent - 2.0).max(0.0);
        let speed = if mid > 0.0 { speed.min(reach / mid) } else { speed };
        let slack = reach - speed * mid;
        let along_mid = along_mid.clamp(-slack, slack);
        let heading = lane_heading(axis, positive);
        let lateral = lane * if positive { 1.0 } else { -1.0 };
        let (mx, my) = lane_point(axis, along_mid, lateral);
        let v = [speed * heading.cos(), speed * heading.sin()];
        let initial = Pose::from_yaw(heading, Vec3::new(mx - v[0] * mid, my - v[1] * mid, h));
        Trajectory::new(
            1000 + id as u32,
            CLASS_VEHICLE,
            vehicle_size,
            Motion::ConstantVelocity { velocity: v },
            initial,
            0.0,
            duration,
        )
        .map(|trajectory| AgentConfig {
            agent_id: id,
            kind,
            trajectory,
            lidar: cfg.lidar,
            detection_rate: cfg.frame_rate,
            profile: "profile-P".into(),
        })
    };

    // Roster order: ego, IRSU, then the remaining vehicles.
    let jitter = |rng: &mut R| rng.random_range(-4.0..4.0);
    let ego_along = -14.0 + jitter(rng);
    agents.push(moving(1, AgentKind::Ego, 0, false, lanes[0], ego_along, cfg.ego_speed)?);
    if cfg.agent_count >= 2 {
        let corner = cfg.road_half_width + 2.5;
        let initial = Pose::from_yaw(-3.0 * PI / 4.0, Vec3::new(corner, corner, cfg.irsu_height));
        agents.push(AgentConfig {
            agent_id: 0,
            kind: AgentKind::Irsu,
            trajectory: Trajectory::new(
                1000,
                CLASS_VEHICLE,
                Vec3::new(1.0, 1.0, 1.0),
                Motion::Static,
                initial,
                0.0,
                duration,
            )?,
            lidar: cfg.lidar,
            detection_rate: cfg.frame_rate,
            profile: "profile-P".into(),
        });
    }
    let cav_slots = [
        (2u8, 1usize, false, 25.0),
        (3, 1, true, -28.0),
        (4, 0, true, 30.0),
        (5, 0, false, -40.0),
    ];
    for &(id, axis, positive, along) in cav_slots.iter().take(cfg.agent_count.saturating_sub(2)) {
        // The `positive` side drives toward decreasing coordinates on the x
        // road and increasing ones on the y road; `along` is chosen so every
        // vehicle is approaching or crossing the intersection mid-run.
        let along = along + jitter(rng);
        let speed = rng.random_range(3.0..7.0);
        let lane = lanes[rng.random_range(0..2usize)];
        agents.push(moving(id, AgentKind::Cav, axis, positive, lane, along, speed)?);
    }
    Ok(agents)
}

fn intensity_for(class_id: u8) -> f64 {
    match class_id {
        CLASS_SMALL => 0.3,
        _ => 0.6,
    }
}

/// Slab-method ray/box intersection in the box frame. Returns the entry
/// distance when the ray starts outside the box and hits it.
fn ray_box_entry(origin_local: &Vec3, dir_local: &Vec3, half: &Vec3) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for k in 0..3 {
        let o = origin_local[k];
        let d = dir_local[k];
        if d.abs() < 1e-15 {
            if o.abs() > half[k] {
                return None;
            }
            continue;
        }
        let t1 = (-half[k] - o) / d;
        let t2 = (half[k] - o) / d;
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        t_near = t_near.max(lo);
        t_far = t_far.min(hi);
        if t_near > t_far {
            return None;
        }
    }
    (t_near > 0.0).then_some(t_near)
}

/// Scans `world` from `agent`'s sensor at time `t`. Points are returned in
/// the agent frame at `t`, ordered by (beam, azimuth bin).
pub fn lidar_scan(world: &World, agent: &AgentConfig, t: f64) -> Result<PointCloud> {
    let sensor = agent.pose_at(t)?;
    let to_sensor = sensor.inverse();
    let spec = &agent.lidar;
    let elevations = spec.beam_elevations();
    let bins = spec.azimuth_bins;
    let step = TAU / bins as f64;
    let dirs_el: Vec<(f64, f64)> = elevations.iter().map(|e| e.sin_cos()).collect();

    let mut depth = vec![f64::INFINITY; spec.beams * bins];
    let mut owner = vec![usize::MAX; spec.beams * bins];
    let mut classes = Vec::with_capacity(world.trajectories.len());

    for (obj_idx, traj) in world.trajectories.iter().enumerate() {
        let b = to_sensor.transform_box(&traj.box_at(t)?);
        classes.push(traj.class_id);
        let half = b.size / 2.0;
        let origin_local = b.to_local(&Vec3::zeros());
        if origin_local.iter().zip(half.iter()).all(|(o, h)| o.abs() <= *h) {
            // Sensor inside the box: the box is not visible from here.
            continue;
        }
        let center_dist = b.center.xy().norm();
        if center_dist - b.size.xy().norm() / 2.0 > spec.max_range {
            continue;
        }
        let inside_footprint = origin_local.x.abs() <= half.x && origin_local.y.abs() <= half.y;
        let (first, count) = if inside_footprint {
            (0i64, bins as i64)
        } else {
            let center_az = b.center.y.atan2(b.center.x);
            let (mut lo, mut hi) = (0.0f64, 0.0f64);
            for c in b.bev_corners() {
                let rel = normalize_angle(c.y.atan2(c.x) - center_az);
                lo = lo.min(rel);
                hi = hi.max(rel);
            }
            let first = ((center_az + lo) / step).floor() as i64 - 1;
            let last = ((center_az + hi) / step).ceil() as i64 + 1;
            (first, (last - first + 1).min(bins as i64))
        };
        let (s, c) = b.yaw.sin_cos();
        for j in first..first + count {
            let bin = j.rem_euclid(bins as i64) as usize;
            let az = bin as f64 * step;
            let (saz, caz) = az.sin_cos();
            for (beam, (sel, cel)) in dirs_el.iter().enumerate() {
                let dir = Vec3::new(cel * caz, cel * saz, *sel);
                let dir_local = Vec3::new(c * dir.x + s * dir.y, -s * dir.x + c * dir.y, dir.z);
                if let Some(hit) = ray_box_entry(&origin_local, &dir_local, &half) {
                    let cell = beam * bins + bin;
                    if hit <= spec.max_range && hit < depth[cell] {
                        depth[cell] = hit;
                        owner[cell] = obj_idx;
                    }
                }
            }
        }
    }

    let mut points = Vec::new();
    for beam in 0..spec.beams {
        let (sel, cel) = dirs_el[beam];
        for bin in 0..bins {
            let cell = beam * bins + bin;
            let d = depth[cell];
            if d.is_finite() {
                let az = bin as f64 * step;
                let (saz, caz) = az.sin_cos();
                let dir = Vec3::new(cel * caz, cel * saz, sel);
                let class_id = classes.get(owner[cell]).copied().unwrap_or(CLASS_VEHICLE);
                points.push(LidarPoint::new(dir * d, intensity_for(class_id), 0.0));
            }
        }
    }
    Ok(PointCloud {
        points,
        frame: Frame::Agent(agent.agent_id),
        timestamp: t,
    })
}

/// Scan times of a `k`-cloud sequence ending at `t`, oldest first.
pub fn sequence_times(frame_rate: f64, t: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| snap_time(t - (k - 1 - i) as f64 / frame_rate)).collect()
}

/// `k` scans ending at `t`, each in the agent frame at its own scan time.
pub fn scan_sequence(world: &World, agent: &AgentConfig, t: f64, k: usize) -> Result<Vec<PointCloud>> {
    if k == 0 {
        return Err(Error::contract("sequence length must be at least 1"));
    }
    let times = sequence_times(world.frame_rate, t, k);
    if times[0] < -TIME_TOL {
        return Err(Error::OutOfRange {
            t: times[0],
            start: 0.0,
            end: world.duration,
        });
    }
    times.into_iter().map(|ts| lidar_scan(world, agent, ts)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GtMode {
    EgoOnly,
    AnyAgent,
}

impl GtMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GtMode::EgoOnly => "ego_only",
            GtMode::AnyAgent => "any_agent",
        }
    }
}

/// True when a box centre, expressed in the ego frame, lies in the
/// ego-centred detection square.
pub fn in_detection_range(center_ego: &Vec3) -> bool {
    center_ego.x.abs() <= DETECTION_RANGE && center_ego.y.abs() <= DETECTION_RANGE
}

/// Ground-truth boxes at `t` that hold at least one LiDAR point from the
/// ego cloud (`EgoOnly`) or from any agent's cloud (`AnyAgent`).
///
/// `clouds` must be in the global frame. The result is expressed in the ego
/// frame at `t` and cropped to [`DETECTION_RANGE`].
pub fn visible_ground_truth(
    world: &World,
    t: f64,
    clouds: &BTreeMap<AgentId, PointCloud>,
    mode: GtMode,
) -> Result<Vec<BoundingBox>> {
    if clouds.values().any(|c| c.frame != Frame::Global) {
        return Err(Error::contract("visibility clouds must be in the global frame"));
    }
    let ego = world.ego();
    let to_ego = ego.pose_at(t)?.inverse();
    let sources: Vec<&PointCloud> = match mode {
        GtMode::EgoOnly => clouds.get(&ego.agent_id).into_iter().collect(),
        GtMode::AnyAgent => clouds.values().collect(),
    };
    let mut out = Vec::new();
    for (_, b) in world.object_boxes_at(t)? {
        let local = to_ego.transform_box(&b);
        if !in_detection_range(&local.center) {
            continue;
        }
        let visible = sources
            .iter()
            .any(|c| c.points.iter().any(|p| point_in_box(&p.position, &b)));
        if visible {
            out.push(local);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent_at(id: AgentId, kind: AgentKind, pose: Pose) -> AgentConfig {
        AgentConfig {
            agent_id: id,
            kind,
            trajectory: Trajectory::new(
                1000 + id as u32,
                0,
                Vec3::new(4.6, 1.9, 1.6),
                Motion::Static,
                pose,
                0.0,
                10.0,
            )
            .unwrap(),
            lidar: LidarSpec::default(),
            detection_rate: 5.0,
            profile: "profile-P".into(),
        }
    }

    fn static_box(id: u32, center: Vec3, size: Vec3) -> Trajectory {
        Trajectory::new(id, 0, size, Motion::Static, Pose::from_yaw(0.0, center), 0.0, 10.0).unwrap()
    }

    fn world_with(objects: Vec<Trajectory>) -> World {
        World {
            trajectories: objects,
            agents: vec![agent_at(
                1,
                AgentKind::Ego,
                Pose::from_translation(Vec3::new(0.0, 0.0, 1.9)),
            )],
            frame_rate: 5.0,
            duration: 10.0,
        }
    }

    #[test]
    fn pose_at_static_and_linear() {
        let p0 = Pose::from_yaw(0.3, Vec3::new(1.0, 2.0, 0.8));
        let s = Trajectory::new(0, 0, Vec3::new(4.0, 2.0, 1.5), Motion::Static, p0, 0.0, 5.0).unwrap();
        assert_eq!(s.pose_at(3.7).unwrap(), p0);
        let cv = Trajectory::new(
            1,
            0,
            Vec3::new(4.0, 2.0, 1.5),
            Motion::ConstantVelocity { velocity: [2.0, 0.0] },
            p0,
            1.0,
            5.0,
        )
        .unwrap();
        let p = cv.pose_at(1.5).unwrap();
        assert!((p.translation - Vec3::new(2.0, 2.0, 0.8)).norm() < 1e-12);
        assert!((p.yaw() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn pose_at_constant_turn_arc() {
        let p0 = Pose::from_yaw(0.0, Vec3::new(0.0, 0.0, 0.0));
        let tr = Trajectory::new(
            0,
            0,
            Vec3::new(4.0, 2.0, 1.5),
            Motion::ConstantTurn {
                speed: 5.0,
                yaw_rate: 0.5,
            },
            p0,
            0.0,
            10.0,
        )
        .unwrap();
        let p = tr.pose_at(PI).unwrap();
        assert!((p.yaw() - 0.5 * PI).abs() < 1e-12);
        // Turning left with radius 10: circle centred at (0, 10).
        let r = (p.translation - Vec3::new(0.0, 10.0, 0.0)).norm();
        assert!((r - 10.0).abs() < 1e-9);
        assert!((p.translation - Vec3::new(10.0, 10.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn pose_at_out_of_range() {
        let tr = static_box(0, Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        assert!(matches!(tr.pose_at(10.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(tr.pose_at(-0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn excessive_yaw_rate_rejected() {
        let r = Trajectory::new(
            0,
            0,
            Vec3::new(1.0, 1.0, 1.0),
            Motion::ConstantTurn {
                speed: 3.0,
                yaw_rate: 1.6,
            },
            Pose::identity(),
            0.0,
            1.0,
        );
        assert!(r.is_err());
    }

    #[test]
    fn generate_empty_and_deterministic() {
        let empty = ScenarioParams {
            object_count: 0,
            ..Default::default()
        };
        assert!(generate_scenario(&empty, 3).unwrap().trajectories.is_empty());
        let cfg = ScenarioParams::default();
        assert_eq!(
            generate_scenario(&cfg, 11).unwrap(),
            generate_scenario(&cfg, 11).unwrap()
        );
        assert_ne!(
            generate_scenario(&cfg, 11).unwrap(),
            generate_scenario(&cfg, 12).unwrap()
        );
    }

    #[test]
    fn generate_dynamic_count() {
        let cfg = ScenarioParams {
            object_count: 40,
            dynamic_fraction: 0.5,
            ..Default::default()
        };
        let w = generate_scenario(&cfg, 5).unwrap();
        assert_eq!(w.trajectories.iter().filter(|t| !t.is_static()).count(), 20);
    }

    #[test]
    fn generated_boxes_do_not_overlap_and_agents_in_extent() {
        let cfg = ScenarioParams::default();
        for seed in 0..5 {
            let w = generate_scenario(&cfg, seed).unwrap();
            let boxes = w.object_boxes_at(0.0).unwrap();
            for i in 0..boxes.len() {
                for j in i + 1..boxes.len() {
                    assert_eq!(bev_iou(&boxes[i].1, &boxes[j].1), 0.0);
                }
            }
            for a in &w.agents {
                for t in [0.0, w.duration] {
                    let p = a.pose_at(t).unwrap().translation;
                    assert!(
                        p.x.abs() <= cfg.extent && p.y.abs() <= cfg.extent,
                        "agent {} at {p:?}",
                        a.agent_id
                    );
                }
            }
            assert_eq!(w.ego().agent_id, 1);
        }
    }

    #[test]
    fn scan_of_empty_world_is_empty() {
        let w = world_with(vec![]);
        assert!(lidar_scan(&w, w.ego(), 0.0).unwrap().is_empty());
    }

    #[test]
    fn box_ahead_is_hit_on_near_face() {
        let w = world_with(vec![static_box(0, Vec3::new(10.0, 0.0, 0.8), Vec3::new(2.0, 2.0, 1.6))]);
        let cloud = lidar_scan(&w, w.ego(), 0.0).unwrap();
        assert!(!cloud.is_empty());
        // Sensor at z=1.9 sees the near face x=9 and the roof.
        assert!(cloud.points.iter().any(|p| (p.position.x - 9.0).abs() < 1e-9));
        let b = w.trajectories[0].box_at(0.0).unwrap();
        let to_sensor = w.ego().pose_at(0.0).unwrap();
        for p in &cloud.points {
            assert!(b.surface_distance(&to_sensor.transform_point(&p.position)) < 1e-6);
        }
    }

    #[test]
    fn small_box_behind_large_box_is_occluded() {
        let w = world_with(vec![
            static_box(0, Vec3::new(10.0, 0.0, 2.0), Vec3::new(1.0, 8.0, 4.0)),
            static_box(1, Vec3::new(20.0, 0.0, 0.5), Vec3::new(1.0, 1.0, 1.0)),
        ]);
        let cloud = lidar_scan(&w, w.ego(), 0.0).unwrap();
        let far = w.trajectories[1].box_at(0.0).unwrap();
        let sensor = w.ego().pose_at(0.0).unwrap();
        assert!(!cloud.is_empty());
        assert!(cloud
            .points
            .iter()
            .all(|p| !point_in_box(&sensor.transform_point(&p.position), &far)));
    }

    #[test]
    fn scan_sequence_timestamps() {
        let w = world_with(vec![static_box(0, Vec3::new(10.0, 0.0, 0.8), Vec3::new(2.0, 2.0, 1.6))]);
        let seq = scan_sequence(&w, w.ego(), 1.0, 3).unwrap();
        let ts: Vec<f64> = seq.iter().map(|c| c.timestamp).collect();
        assert_eq!(ts, vec![0.6, 0.8, 1.0]);
        assert_eq!(seq[0].points, seq[2].points);
        let single = scan_sequence(&w, w.ego(), 1.0, 1).unwrap();
        assert_eq!(single[0], lidar_scan(&w, w.ego(), 1.0).unwrap());
        assert!(scan_sequence(&w, w.ego(), 0.2, 3).is_err());
    }

    fn gt_world() -> World {
        let mut w = world_with(vec![
            static_box(0, Vec3::new(10.0, 0.0, 0.8), Vec3::new(2.0, 2.0, 1.6)),
            static_box(1, Vec3::new(-10.0, 0.0, 0.8), Vec3::new(2.0, 2.0, 1.6)),
            static_box(2, Vec3::new(0.0, 30.0, 0.8), Vec3::new(2.0, 2.0, 1.6)),
        ]);
        w.agents.push(agent_at(
            0,
            AgentKind::Irsu,
            Pose::from_translation(Vec3::new(0.0, 0.0, 6.0)),
        ));
        w
    }

    fn cloud_with(points: &[Vec3]) -> PointCloud {
        PointCloud {
            points: points.iter().map(|p| LidarPoint::new(*p, 0.5, 0.0)).collect(),
            frame: Frame::Global,
            timestamp: 0.0,
        }
    }

    #[test]
    fn visible_ground_truth_modes() {
        let w = gt_world();
        let mut clouds = BTreeMap::new();
        clouds.insert(1, cloud_with(&[Vec3::new(9.0, 0.0, 0.5)]));
        clouds.insert(0, cloud_with(&[Vec3::new(-10.0, 0.0, 1.6), Vec3::new(9.5, 0.5, 0.5)]));
        let ego = visible_ground_truth(&w, 0.0, &clouds, GtMode::EgoOnly).unwrap();
        let any = visible_ground_truth(&w, 0.0, &clouds, GtMode::AnyAgent).unwrap();
        assert_eq!(ego.len(), 1);
        assert_eq!(any.len(), 2);
        // Ego frame is offset by the sensor height only.
        assert!((ego[0].center - Vec3::new(10.0, 0.0, -1.1)).norm() < 1e-12);
        assert!(any.iter().any(|b| (b.center.x + 10.0).abs() < 1e-12));
        assert!(!any.iter().any(|b| (b.center.y - 30.0).abs() < 1e-9));
    }

    #[test]
    fn visible_ground_truth_crops_range() {
        let mut w = gt_world();
        w.trajectories
            .push(static_box(9, Vec3::new(60.0, 0.0, 0.8), Vec3::new(2.0, 2.0, 1.6)));
        let mut clouds = BTreeMap::new();
        clouds.insert(1, cloud_with(&[Vec3::new(59.5, 0.0, 0.5)]));
        assert!(visible_ground_truth(&w, 0.0, &clouds, GtMode::EgoOnly)
            .unwrap()
            .is_empty());
    }
}
