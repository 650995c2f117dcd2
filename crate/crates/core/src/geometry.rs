//! Rigid-motion algebra and point/box geometry.
//!
//! Every pose is a rigid transform `x -> R x + t` mapping points from a
//! source frame into a destination frame. Object and agent motion in this
//! crate is planar (rotation about +z only), but [`Pose`] stays fully 3D so
//! elevated sensors and arbitrary chains of transforms remain exact.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type AgentId = u8;

/// Tolerance applied to box membership so that LiDAR returns sitting on a
/// box face are not lost to floating-point round-off.
pub const BOX_EPS: f64 = 1e-9;

const ORTHO_TOL: f64 = 1e-9;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let x = a.rem_euclid(TAU);
    if x > PI {
        x - TAU
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    /// Builds a pose after checking that `rotation` is a proper rotation.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.iter().any(|v| v.abs() > ORTHO_TOL) {
            return Err(Error::contract("rotation is not orthonormal"));
        }
        if (rotation.determinant() - 1.0).abs() > ORTHO_TOL {
            return Err(Error::contract("rotation determinant is not +1"));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::contract("translation is not finite"));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about +z by `yaw`, then translation.
    pub fn from_yaw(yaw: f64, translation: Vec3) -> Self {
        let rotation = *Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).matrix();
        Self { rotation, translation }
    }

    /// Heading of the rotated +x axis projected on the ground plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }

    /// Rotates a free vector (displacement, flow) without translating it.
    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn transform_box(&self, b: &BoundingBox) -> BoundingBox {
        BoundingBox {
            center: self.transform_point(&b.center),
            yaw: normalize_angle(b.yaw + self.yaw()),
            ..*b
        }
    }
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

pub fn invert(p: &Pose) -> Pose {
    p.inverse()
}

pub fn transform_point(p: &Pose, x: &Vec3) -> Vec3 {
    p.transform_point(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarPoint {
    pub position: Vec3,
    /// Return intensity in `[0, 1]`.
    pub intensity: f64,
    /// Seconds between this point's scan and the reference time of its cloud.
    pub time_lag: f64,
}

impl LidarPoint {
    pub fn new(position: Vec3, intensity: f64, time_lag: f64) -> Self {
        Self {
            position,
            intensity,
            time_lag,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    Global,
    /// Sensor frame of an agent at the cloud's timestamp.
    Agent(AgentId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<LidarPoint>,
    pub frame: Frame,
    pub timestamp: f64,
}

impl PointCloud {
    pub fn empty(frame: Frame, timestamp: f64) -> Self {
        Self {
            points: Vec::new(),
            frame,
            timestamp,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Re-expresses every point through `pose`, relabelling the frame.
    pub fn transformed(&self, pose: &Pose, frame: Frame) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| LidarPoint {
                    position: pose.transform_point(&p.position),
                    ..*p
                })
                .collect(),
            frame,
            timestamp: self.timestamp,
        }
    }
}

/// Oriented 3D box: `[x, y, z, w, l, h, yaw, score, class]`.
///
/// `w` spans the box's local x axis (the heading direction given by `yaw`),
/// `l` its local y axis and `h` the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub center: Vec3,
    pub size: Vec3,
    pub yaw: f64,
    pub score: f64,
    pub class_id: u8,
}

impl BoundingBox {
    pub fn new(center: Vec3, size: Vec3, yaw: f64, score: f64, class_id: u8) -> Self {
        Self {
            center,
            size,
            yaw: normalize_angle(yaw),
            score,
            class_id,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.size.iter().all(|s| *s > 0.0 && s.is_finite())
            && self.center.iter().all(|c| c.is_finite())
            && self.yaw.is_finite()
    }

    /// Box-to-parent pose: maps box-local coordinates into the box's frame.
    pub fn pose(&self) -> Pose {
        Pose::from_yaw(self.yaw, self.center)
    }

    /// Ground-plane corners in counter-clockwise order.
    pub fn bev_corners(&self) -> [Vector2<f64>; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hw = self.size.x / 2.0;
        let hl = self.size.y / 2.0;
        let local = [(-hw, -hl), (hw, -hl), (hw, hl), (-hw, hl)];
        local.map(|(x, y)| Vector2::new(self.center.x + c * x - s * y, self.center.y + s * x + c * y))
    }

    pub fn bev_area(&self) -> f64 {
        self.size.x * self.size.y
    }

    /// Expresses `x` in the box's yaw-aligned local frame.
    pub fn to_local(&self, x: &Vec3) -> Vec3 {
        let d = x - self.center;
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z)
    }

    /// Euclidean distance from `x` to the box surface (zero on the surface).
    pub fn surface_distance(&self, x: &Vec3) -> f64 {
        let local = self.to_local(x);
        let half = self.size / 2.0;
        let q = local.abs() - half;
        let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
        let inside = q.x.max(q.y).max(q.z).min(0.0);
        outside + inside.abs()
    }
}

/// Boundary-inclusive membership test in the box's yaw-aligned frame.
pub fn point_in_box(x: &Vec3, b: &BoundingBox) -> bool {
    let local = b.to_local(x);
    let half = b.size / 2.0;
    local.x.abs() <= half.x + BOX_EPS && local.y.abs() <= half.y + BOX_EPS && local.z.abs() <= half.z + BOX_EPS
}

/// Concatenates a scan sequence into the global frame (ego motion
/// compensation). Each cloud `i` is mapped through `ego_poses[i]`; output
/// lags are measured from the newest cloud's timestamp.
pub fn emc_concatenate(seq: &[PointCloud], ego_poses: &[Pose]) -> Result<PointCloud> {
    if seq.len() != ego_poses.len() {
        return Err(Error::contract(format!(
            "{} clouds but {} poses",
            seq.len(),
            ego_poses.len()
        )));
    }
    let Some(newest) = seq.last() else {
        return Err(Error::contract("empty scan sequence"));
    };
    if seq.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::contract("clouds must be ordered oldest to newest"));
    }
    let t_newest = newest.timestamp;
    let total = seq.iter().map(PointCloud::len).sum();
    let mut points = Vec::with_capacity(total);
    for (cloud, pose) in seq.iter().zip(ego_poses) {
        let lag = t_newest - cloud.timestamp;
        points.extend(cloud.points.iter().map(|p| LidarPoint {
            position: pose.transform_point(&p.position),
            intensity: p.intensity,
            time_lag: p.time_lag + lag,
        }));
    }
    Ok(PointCloud {
        points,
        frame: Frame::Global,
        timestamp: t_newest,
    })
}

/// Carries a global point observed on an object at `obj_pose_then` onto the
/// object's pose `obj_pose_now`, assuming the object is rigid.
pub fn rectify_point(x_global: &Vec3, obj_pose_then: &Pose, obj_pose_now: &Pose) -> Vec3 {
    let rectification = obj_pose_now.compose(&obj_pose_then.inverse());
    rectification.transform_point(x_global)
}

type Polygon = Vec<Vector2<f64>>;

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn polygon_area(poly: &[Vector2<f64>]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc.abs() / 2.0
}

/// Sutherland-Hodgman clipping of `subject` against the convex CCW `clip`.
fn clip_convex(subject: &[Vector2<f64>], clip: &[Vector2<f64>]) -> Polygon {
    let mut output: Polygon = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(&a, &b, &cur) >= 0.0;
            let prev_in = cross(&a, &b, &prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(&prev, &cur, &a, &b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(&prev, &cur, &a, &b));
            }
        }
    }
    dedup_vertices(output)
}

fn line_intersection(p: &Vector2<f64>, q: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> Vector2<f64> {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let denom = dp - dq;
    if denom.abs() < f64::EPSILON {
        return *p;
    }
    p + (q - p) * (dp / denom)
}

/// Drops consecutive coincident vertices; exact duplicates only.
fn dedup_vertices(mut poly: Polygon) -> Polygon {
    poly.dedup_by(|a, b| a == b);
    while poly.len() > 1 && poly.first() == poly.last() {
        poly.pop();
    }
    poly
}

/// Intersection over union of the two boxes' ground-plane rectangles.
pub fn bev_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let area_a = a.bev_area();
    let area_b = b.bev_area();
    if area_a <= 0.0 || area_b <= 0.0 {
        return 0.0;
    }
    // Cheap reject on circumscribed circles.
    let ra = a.size.x.hypot(a.size.y) / 2.0;
    let rb = b.size.x.hypot(b.size.y) / 2.0;
    let d = (a.center.xy() - b.center.xy()).norm();
    if d > ra + rb {
        return 0.0;
    }
    let inter = polygon_area(&clip_convex(&a.bev_corners(), &b.bev_corners()));
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
