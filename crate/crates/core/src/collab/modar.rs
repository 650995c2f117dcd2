//! Detected boxes re-encoded as single points ("MoDAR points"): pooling
//! their scene flow, propagating them in time, moving them between agent
//! frames and padding them into a receiver's point cloud.

use std::cmp::Ordering;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowVector;
use crate::geometry::{normalize_angle, point_in_box, AgentId, BoundingBox, PointCloud, Pose, Vec3};

const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModarPoint {
    pub position: Vec3,
    pub feat_size: Vec3,
    pub feat_yaw: f64,
    pub feat_score: f64,
    pub feat_class: u8,
    pub pooled_flow: FlowVector,
    pub source_agent: AgentId,
    pub source_time: f64,
}

/// How a sender turns per-point flow into the flow it attaches to a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Plain mean of in-box flows; the receiver scales it by `lag / span`.
    Eq5,
    /// Least-squares velocity through the origin, `sum(lag * f) / sum(lag^2)`,
    /// transmitted as `velocity * span` so the same receiver formula yields
    /// `velocity * lag`.
    LagWeighted,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq5" => Ok(Estimator::Eq5),
            "lag_weighted" => Ok(Estimator::LagWeighted),
            other => Err(Error::contract(format!(
                "unknown estimator '{other}' (expected eq5 or lag_weighted)"
            ))),
        }
    }
}

pub fn box_to_modar(b: &BoundingBox, flow: FlowVector, agent: AgentId, t_i: f64) -> ModarPoint {
    ModarPoint {
        position: b.center,
        feat_size: b.size,
        feat_yaw: b.yaw,
        feat_score: b.score,
        feat_class: b.class_id,
        pooled_flow: flow,
        source_agent: agent,
        source_time: t_i,
    }
}

pub fn modar_to_box(m: &ModarPoint) -> BoundingBox {
    BoundingBox {
        center: m.position,
        size: m.feat_size,
        yaw: m.feat_yaw,
        score: m.feat_score,
        class_id: m.feat_class,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledFlow {
    pub flow: FlowVector,
    /// No usable point fell inside the box; `flow` is zero.
    pub empty: bool,
}

fn check_aligned(cloud: &PointCloud, flows: &[FlowVector]) -> Result<()> {
    if cloud.len() != flows.len() {
        return Err(Error::contract(format!(
            "{} points but {} flows",
            cloud.len(),
            flows.len()
        )));
    }
    Ok(())
}

/// Mean flow of the cloud points lying inside `b`.
pub fn pool_box_flow(b: &BoundingBox, cloud: &PointCloud, flows: &[FlowVector]) -> Result<PooledFlow> {
    check_aligned(cloud, flows)?;
    let (sum, n) = cloud
        .points
        .iter()
        .zip(flows)
        .filter(|(p, _)| point_in_box(&p.position, b))
        .fold((FlowVector::zeros(), 0usize), |(s, n), (_, f)| (s + f, n + 1));
    Ok(if n == 0 {
        PooledFlow {
            flow: FlowVector::zeros(),
            empty: true,
        }
    } else {
        PooledFlow {
            flow: sum / n as f64,
            empty: false,
        }
    })
}

/// Lag-weighted least-squares velocity of the in-box points, m/s.
///
/// Each in-box point with lag `d` and flow `f` contributes the equation
/// `f = v * d`. Points with zero lag carry no velocity information; when
/// every in-box point has zero lag the result is flagged empty.
pub fn pool_box_velocity(b: &BoundingBox, cloud: &PointCloud, flows: &[FlowVector]) -> Result<PooledFlow> {
    check_aligned(cloud, flows)?;
    let (num, den) = cloud
        .points
        .iter()
        .zip(flows)
        .filter(|(p, _)| point_in_box(&p.position, b))
        .fold((FlowVector::zeros(), 0.0), |(num, den), (p, f)| {
            (num + f * p.time_lag, den + p.time_lag * p.time_lag)
        });
    Ok(if den > 0.0 {
        PooledFlow {
            flow: num / den,
            empty: false,
        }
    } else {
        PooledFlow {
            flow: FlowVector::zeros(),
            empty: true,
        }
    })
}

/// Flow a sender attaches to box `b` under `estimator`.
pub fn pooled_flow(
    estimator: Estimator,
    b: &BoundingBox,
    cloud: &PointCloud,
    flows: &[FlowVector],
    span: f64,
) -> Result<PooledFlow> {
    match estimator {
        Estimator::Eq5 => pool_box_flow(b, cloud, flows),
        Estimator::LagWeighted => {
            let v = pool_box_velocity(b, cloud, flows)?;
            Ok(PooledFlow {
                flow: v.flow * span,
                empty: v.empty,
            })
        }
    }
}

/// Moves `m` forward to time `t`: `position += ((t - t_i) / span) * flow`.
pub fn propagate_modar(m: &ModarPoint, t: f64, span: f64) -> Result<ModarPoint> {
    if t < m.source_time - TIME_TOL {
        return Err(Error::contract(format!(
            "cannot propagate from {} back to {t}",
            m.source_time
        )));
    }
    if !(span > 0.0) {
        return Err(Error::contract("sequence span must be positive"));
    }
    let factor = (t - m.source_time) / span;
    Ok(ModarPoint {
        position: m.position + m.pooled_flow * factor,
        ..*m
    })
}

/// Re-expresses `m` from the sender's frame into the ego frame, both given
/// by their global poses.
pub fn modar_to_ego_frame(m: &ModarPoint, pose_sender: &Pose, pose_ego: &Pose) -> ModarPoint {
    let relative = pose_ego.inverse().compose(pose_sender);
    ModarPoint {
        position: relative.transform_point(&m.position),
        feat_yaw: normalize_angle(m.feat_yaw + pose_sender.yaw() - pose_ego.yaw()),
        pooled_flow: relative.transform_vector(&m.pooled_flow),
        ..*m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointKind {
    Lidar,
    Modar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarFeatures {
    pub intensity: f64,
    pub time_lag: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModarFeatures {
    pub size: Vec3,
    pub yaw: f64,
    pub score: f64,
    pub class_id: u8,
}

/// A point of the padded detector input. Exactly one feature block is set;
/// the other is the null block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusedPoint {
    pub position: Vec3,
    pub kind: PointKind,
    pub lidar_feat: Option<LidarFeatures>,
    pub modar_feat: Option<ModarFeatures>,
}

impl FusedPoint {
    /// Feature row with nulls (zeros) padded in:
    /// `[intensity, time_lag, w, l, h, yaw, score, class]`.
    pub fn feature_row(&self) -> [f64; 8] {
        let l = self.lidar_feat.unwrap_or(LidarFeatures {
            intensity: 0.0,
            time_lag: 0.0,
        });
        let m = self.modar_feat.unwrap_or(ModarFeatures {
            size: Vec3::zeros(),
            yaw: 0.0,
            score: 0.0,
            class_id: 0,
        });
        [
            l.intensity,
            l.time_lag,
            m.size.x,
            m.size.y,
            m.size.z,
            m.yaw,
            m.score,
            m.class_id as f64,
        ]
    }
}

fn modar_order(a: &ModarPoint, b: &ModarPoint) -> Ordering {
    a.source_agent
        .cmp(&b.source_agent)
        .then(a.source_time.total_cmp(&b.source_time))
        .then(a.position.x.total_cmp(&b.position.x))
        .then(a.position.y.total_cmp(&b.position.y))
        .then(a.position.z.total_cmp(&b.position.z))
}

/// Pads the ego cloud and the received MoDAR points into one point set:
/// cloud points first, then MoDAR points ordered by (agent, time, position).
pub fn fuse_modar(cloud: &PointCloud, modars: &[ModarPoint]) -> Vec<FusedPoint> {
    let mut sorted = modars.to_vec();
    sorted.sort_by(modar_order);
    let lidar = cloud.points.iter().map(|p| FusedPoint {
        position: p.position,
        kind: PointKind::Lidar,
        lidar_feat: Some(LidarFeatures {
            intensity: p.intensity,
            time_lag: p.time_lag,
        }),
        modar_feat: None,
    });
    let modar = sorted.into_iter().map(|m| FusedPoint {
        position: m.position,
        kind: PointKind::Modar,
        lidar_feat: None,
        modar_feat: Some(ModarFeatures {
            size: m.feat_size,
            yaw: m.feat_yaw,
            score: m.feat_score,
            class_id: m.feat_class,
        }),
    });
    lidar.chain(modar).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Frame, LidarPoint};
    use std::f64::consts::FRAC_PI_2;

    fn sample_box() -> BoundingBox {
        BoundingBox::new(Vec3::new(1.0, 2.0, 0.0), Vec3::new(2.0, 4.0, 1.5), 0.3, 0.8, 1)
    }

    #[test]
    fn box_modar_field_mapping() {
        let b = sample_box();
        let m = box_to_modar(&b, FlowVector::zeros(), 2, 0.4);
        assert_eq!(m.position, b.center);
        assert_eq!(m.feat_size, b.size);
        assert_eq!((m.feat_yaw, m.feat_score, m.feat_class), (0.3, 0.8, 1));
        assert_eq!(m.pooled_flow, FlowVector::zeros());
        assert_eq!(modar_to_box(&m), b);
    }

    fn cloud(points: &[(Vec3, f64)]) -> PointCloud {
        PointCloud {
            points: points.iter().map(|(p, lag)| LidarPoint::new(*p, 0.5, *lag)).collect(),
            frame: Frame::Agent(2),
            timestamp: 1.0,
        }
    }

    #[test]
    fn pool_examples() {
        let b = BoundingBox::new(Vec3::zeros(), Vec3::new(4.0, 2.0, 2.0), 0.0, 1.0, 0);
        let c = cloud(&[
            (Vec3::new(0.5, 0.0, 0.0), 0.2),
            (Vec3::new(-1.0, 0.5, 0.0), 0.4),
            (Vec3::new(9.0, 0.0, 0.0), 0.0),
        ]);
        let f = Vec3::new(0.3, -0.1, 0.0);
        let same = pool_box_flow(&b, &c, &[f, f, Vec3::new(5.0, 5.0, 5.0)]).unwrap();
        assert!(!same.empty);
        assert!((same.flow - f).norm() < 1e-15);
        let mixed = pool_box_flow(&b, &c, &[Vec3::x(), Vec3::y(), Vec3::z()]).unwrap();
        assert_eq!(mixed.flow, Vec3::new(0.5, 0.5, 0.0));
        let outside = cloud(&[(Vec3::new(9.0, 0.0, 0.0), 0.2)]);
        let none = pool_box_flow(&b, &outside, &[Vec3::x()]).unwrap();
        assert!(none.empty);
        assert_eq!(none.flow, FlowVector::zeros());
        assert!(pool_box_flow(&b, &outside, &[]).is_err());
    }

    #[test]
    fn lag_weighted_recovers_velocity() {
        let b = BoundingBox::new(Vec3::zeros(), Vec3::new(4.0, 2.0, 2.0), 0.0, 1.0, 0);
        let v = Vec3::new(3.0, 1.0, 0.0);
        let lags = [0.0, 0.2, 0.2, 0.4];
        let c = cloud(&lags.map(|d| (Vec3::new(0.1, 0.1, 0.0), d)));
        let flows: Vec<_> = lags.iter().map(|d| v * *d).collect();
        let est = pool_box_velocity(&b, &c, &flows).unwrap();
        assert!((est.flow - v).norm() < 1e-12);
        // The plain mean only sees v times the mean lag.
        let mean = pool_box_flow(&b, &c, &flows).unwrap();
        assert!((mean.flow - v * 0.2).norm() < 1e-12);
        let only_now = cloud(&[(Vec3::zeros(), 0.0)]);
        assert!(pool_box_velocity(&b, &only_now, &[Vec3::zeros()]).unwrap().empty);
        let sent = pooled_flow(Estimator::LagWeighted, &b, &c, &flows, 0.6).unwrap();
        assert!((sent.flow - v * 0.6).norm() < 1e-12);
    }

    #[test]
    fn propagate_examples() {
        let mut m = box_to_modar(&sample_box(), Vec3::new(1.0, 0.0, 0.0), 0, 1.0);
        assert_eq!(propagate_modar(&m, 1.0, 0.5).unwrap(), m);
        let p = propagate_modar(&m, 1.2, 0.5).unwrap();
        assert!((p.position - m.position - Vec3::new(0.4, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(p.feat_size, m.feat_size);
        m.pooled_flow = Vec3::zeros();
        assert_eq!(propagate_modar(&m, 3.0, 0.5).unwrap().position, m.position);
        assert!(propagate_modar(&m, 0.5, 0.5).is_err());
    }

    #[test]
    fn ego_frame_examples() {
        let m = box_to_modar(
            &BoundingBox::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 2.0, 1.0), 0.2, 0.5, 0),
            Vec3::x(),
            0,
            0.0,
        );
        let p = Pose::from_yaw(0.7, Vec3::new(3.0, 4.0, 1.0));
        assert_eq!(modar_to_ego_frame(&m, &p, &p).position, m.position);
        let sender = Pose::from_translation(Vec3::new(10.0, 0.0, 0.0));
        let moved = modar_to_ego_frame(&m, &sender, &Pose::identity());
        assert!((moved.position - Vec3::new(11.0, 0.0, 0.0)).norm() < 1e-12);
        let ego = Pose::from_yaw(FRAC_PI_2, Vec3::zeros());
        let turned = modar_to_ego_frame(&m, &Pose::identity(), &ego);
        assert!((normalize_angle(turned.feat_yaw - (0.2 - FRAC_PI_2))).abs() < 1e-12);
        assert!((turned.pooled_flow - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn fuse_examples() {
        let c = cloud(&[(Vec3::zeros(), 0.0), (Vec3::x(), 0.2), (Vec3::y(), 0.4)]);
        let only_cloud = fuse_modar(&c, &[]);
        assert_eq!(only_cloud.len(), 3);
        assert!(only_cloud
            .iter()
            .all(|p| p.kind == PointKind::Lidar && p.modar_feat.is_none()));
        let a = box_to_modar(&sample_box(), Vec3::zeros(), 3, 0.8);
        let b = box_to_modar(&sample_box(), Vec3::zeros(), 0, 0.8);
        let fused = fuse_modar(&c, &[a, b]);
        assert_eq!(fused.len(), 5);
        assert_eq!(fused.iter().filter(|p| p.kind == PointKind::Modar).count(), 2);
        for p in &fused {
            assert!(p.lidar_feat.is_some() != p.modar_feat.is_some());
        }
        assert_eq!(fused[4].feature_row()[..2], [0.0, 0.0]);
        assert_eq!(fused[0].feature_row()[2..], [0.0; 6]);
    }

    #[test]
    fn estimator_parse() {
        assert_eq!("eq5".parse::<Estimator>().unwrap(), Estimator::Eq5);
        assert_eq!("lag_weighted".parse::<Estimator>().unwrap(), Estimator::LagWeighted);
        assert!("kalman".parse::<Estimator>().is_err());
    }
}
