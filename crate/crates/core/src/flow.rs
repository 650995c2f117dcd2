//! Ground-truth scene flow, a parametric estimation-noise model and the
//! standard flow metrics (EPE, AccS, AccR, ROutliers).

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_in_box, rectify_point, BoundingBox, Frame, PointCloud, Pose, Vec3};
use crate::rng::{self, Module};
use crate::scene::{snap_time, World};

/// Per-point displacement, metres.
pub type FlowVector = Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowNoiseProfile {
    /// Per-axis Gaussian standard deviation, metres.
    pub sigma: f64,
    /// Probability a foreground point is assigned zero flow.
    pub miss_rate: f64,
    /// Probability a background point is assigned spurious Gaussian flow.
    pub false_rate: f64,
}

impl Default for FlowNoiseProfile {
    fn default() -> Self {
        Self {
            sigma: 0.05,
            miss_rate: 0.03,
            false_rate: 0.01,
        }
    }
}

impl FlowNoiseProfile {
    pub const EXACT: FlowNoiseProfile = FlowNoiseProfile {
        sigma: 0.0,
        miss_rate: 0.0,
        false_rate: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let rates_ok = (0.0..=1.0).contains(&self.miss_rate) && (0.0..=1.0).contains(&self.false_rate);
        if self.sigma < 0.0 || !self.sigma.is_finite() || !rates_ok {
            return Err(Error::contract("flow noise needs sigma >= 0 and rates in [0, 1]"));
        }
        Ok(())
    }
}

/// Ground-truth flow of a cloud together with the foreground mask used to
/// compute it.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFlow {
    pub flows: Vec<FlowVector>,
    /// True where the point lies on an object at its source time.
    pub foreground: Vec<bool>,
}

/// Exact rectifying flow for every point of a global-frame cloud.
///
/// A point with lag `d` was observed at `t_target - d`; if it lies inside an
/// object's box at that time its flow carries it onto the object's pose at
/// `t_target`, otherwise it is background and gets the zero vector.
pub fn oracle_flow(cloud: &PointCloud, world: &World, t_target: f64) -> Result<OracleFlow> {
    if cloud.frame != Frame::Global {
        return Err(Error::contract("oracle flow expects a global-frame cloud"));
    }
    let target_poses: Vec<Pose> = world
        .trajectories
        .iter()
        .map(|tr| tr.pose_at(t_target))
        .collect::<Result<_>>()?;
    // Boxes and poses per distinct source time (one per scan in the sequence).
    let mut by_time: BTreeMap<i64, Vec<(BoundingBox, Pose)>> = BTreeMap::new();
    let mut flows = Vec::with_capacity(cloud.len());
    let mut foreground = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        let source = snap_time(t_target - p.time_lag);
        let key = rng::tick(source);
        if !by_time.contains_key(&key) {
            let entry = world
                .trajectories
                .iter()
                .map(|tr| Ok((tr.box_at(source)?, tr.pose_at(source)?)))
                .collect::<Result<Vec<_>>>()?;
            by_time.insert(key, entry);
        }
        let objects = &by_time[&key];
        let hit = objects.iter().position(|(b, _)| point_in_box(&p.position, b));
        match hit {
            Some(i) => {
                let rectified = rectify_point(&p.position, &objects[i].1, &target_poses[i]);
                flows.push(rectified - p.position);
                foreground.push(true);
            }
            None => {
                flows.push(FlowVector::zeros());
                foreground.push(false);
            }
        }
    }
    Ok(OracleFlow { flows, foreground })
}

/// Simulates an imperfect flow estimator: Gaussian error on foreground
/// points, dropped foreground flow with probability `miss_rate`, and
/// spurious flow on background points with probability `false_rate`.
pub fn perturb_flow(
    flows: &[FlowVector],
    foreground: &[bool],
    profile: &FlowNoiseProfile,
    seed: u64,
) -> Result<Vec<FlowVector>> {
    profile.validate()?;
    if flows.len() != foreground.len() {
        return Err(Error::contract("flow and foreground mask lengths differ"));
    }
    if profile.sigma == 0.0 && profile.miss_rate == 0.0 && profile.false_rate == 0.0 {
        return Ok(flows.to_vec());
    }
    let mut rng = rng::stream(seed, Module::Flow, 0, 0, 0);
    let normal = Normal::new(0.0, profile.sigma).expect("sigma validated");
    let gauss =
        |rng: &mut rand_chacha::ChaCha8Rng| FlowVector::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
    Ok(flows
        .iter()
        .zip(foreground)
        .map(|(f, fg)| {
            if *fg {
                if rng.random_bool(profile.miss_rate) {
                    FlowVector::zeros()
                } else {
                    f + gauss(&mut rng)
                }
            } else if rng.random_bool(profile.false_rate) {
                f + gauss(&mut rng)
            } else {
                *f
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowMetrics {
    /// Mean end-point error, metres.
    pub epe: f64,
    /// Percent of points with EPE < 0.05 m or relative error < 0.05.
    pub acc_s: f64,
    /// Percent of points with EPE < 0.10 m or relative error < 0.10.
    pub acc_r: f64,
    /// Percent of points with EPE > 0.30 m and relative error > 0.30.
    pub r_outliers: f64,
}

/// `|pred - gt| / |gt|`, with `0/0 = 0` and `x/0 = inf` for `x > 0`.
fn relative_error(err: f64, gt_norm: f64) -> f64 {
    if gt_norm > 0.0 {
        err / gt_norm
    } else if err > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

pub fn flow_metrics(pred: &[FlowVector], gt: &[FlowVector]) -> Result<FlowMetrics> {
    if pred.len() != gt.len() {
        return Err(Error::contract(format!(
            "prediction has {} flows, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::contract("flow metrics need at least one point"));
    }
    let (mut epe_sum, mut strict, mut relaxed, mut outliers) = (0.0, 0usize, 0usize, 0usize);
    for (p, g) in pred.iter().zip(gt) {
        let err = (p - g).norm();
        let rel = relative_error(err, g.norm());
        epe_sum += err;
        strict += usize::from(err < 0.05 || rel < 0.05);
        relaxed += usize::from(err < 0.10 || rel < 0.10);
        outliers += usize::from(err > 0.30 && rel > 0.30);
    }
    let n = pred.len() as f64;
    Ok(FlowMetrics {
        epe: epe_sum / n,
        acc_s: 100.0 * strict as f64 / n,
        acc_r: 100.0 * relaxed as f64 / n,
        r_outliers: 100.0 * outliers as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LidarPoint;
    use crate::scene::{AgentConfig, AgentKind, LidarSpec, Motion, Trajectory};

    fn world(objects: Vec<Trajectory>) -> World {
        let ego = Trajectory::new(
            1001,
            0,
            Vec3::new(4.6, 1.9, 1.6),
            Motion::Static,
            Pose::from_translation(Vec3::new(-20.0, 0.0, 1.9)),
            0.0,
            10.0,
        )
        .unwrap();
        World {
            trajectories: objects,
            agents: vec![AgentConfig {
                agent_id: 1,
                kind: AgentKind::Ego,
                trajectory: ego,
                lidar: LidarSpec::default(),
                detection_rate: 5.0,
                profile: "profile-P".into(),
            }],
            frame_rate: 5.0,
            duration: 10.0,
        }
    }

    fn cloud(points: &[(Vec3, f64)], t: f64) -> PointCloud {
        PointCloud {
            points: points.iter().map(|(x, lag)| LidarPoint::new(*x, 0.5, *lag)).collect(),
            frame: Frame::Global,
            timestamp: t,
        }
    }

    #[test]
    fn oracle_flow_examples() {
        let size = Vec3::new(4.0, 2.0, 1.5);
        let still = Trajectory::new(
            0,
            0,
            size,
            Motion::Static,
            Pose::from_translation(Vec3::new(0.0, 10.0, 0.75)),
            0.0,
            10.0,
        )
        .unwrap();
        let moving = Trajectory::new(
            1,
            0,
            size,
            Motion::ConstantVelocity { velocity: [2.0, 0.0] },
            Pose::from_translation(Vec3::new(0.0, 0.0, 0.75)),
            0.0,
            10.0,
        )
        .unwrap();
        let w = world(vec![still, moving]);
        // At t = 1.0 - 0.3 the moving box is centred at x = 1.4.
        let c = cloud(
            &[
                (Vec3::new(0.5, 10.0, 0.5), 0.2),
                (Vec3::new(1.4 + 2.0, 0.5, 0.5), 0.3),
                (Vec3::new(30.0, 30.0, 0.0), 0.0),
            ],
            1.0,
        );
        let out = oracle_flow(&c, &w, 1.0).unwrap();
        assert_eq!(out.foreground, vec![true, true, false]);
        assert_eq!(out.flows[0], Vec3::zeros());
        assert!((out.flows[1] - Vec3::new(0.6, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(out.flows[2], Vec3::zeros());
    }

    #[test]
    fn perturb_identity_and_miss() {
        let flows = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0), Vec3::zeros()];
        let fg = vec![true, true, false];
        assert_eq!(perturb_flow(&flows, &fg, &FlowNoiseProfile::EXACT, 4).unwrap(), flows);
        let all_miss = FlowNoiseProfile {
            sigma: 0.1,
            miss_rate: 1.0,
            false_rate: 0.0,
        };
        let out = perturb_flow(&flows, &fg, &all_miss, 4).unwrap();
        assert!(out.iter().all(|f| *f == Vec3::zeros()));
    }

    #[test]
    fn perturb_is_deterministic() {
        let flows = vec![Vec3::new(1.0, 0.0, 0.0); 50];
        let fg = vec![true; 50];
        let p = FlowNoiseProfile::default();
        assert_eq!(
            perturb_flow(&flows, &fg, &p, 9).unwrap(),
            perturb_flow(&flows, &fg, &p, 9).unwrap()
        );
        assert_ne!(
            perturb_flow(&flows, &fg, &p, 9).unwrap(),
            perturb_flow(&flows, &fg, &p, 10).unwrap()
        );
    }

    #[test]
    fn metrics_examples() {
        let gt = vec![Vec3::new(1.0, 0.0, 0.0)];
        let m = flow_metrics(&gt, &gt).unwrap();
        assert_eq!((m.epe, m.acc_s, m.acc_r, m.r_outliers), (0.0, 100.0, 100.0, 0.0));

        let m = flow_metrics(&[Vec3::new(1.5, 0.0, 0.0)], &gt).unwrap();
        assert!((m.epe - 0.5).abs() < 1e-12);
        assert_eq!((m.acc_s, m.acc_r, m.r_outliers), (0.0, 0.0, 100.0));

        let m = flow_metrics(&[Vec3::new(1.04, 0.0, 0.0)], &gt).unwrap();
        assert!((m.epe - 0.04).abs() < 1e-12);
        assert_eq!((m.acc_s, m.acc_r, m.r_outliers), (100.0, 100.0, 0.0));
    }

    #[test]
    fn metrics_static_point_conventions() {
        // False flow on a static point is infinitely wrong in relative terms.
        let m = flow_metrics(&[Vec3::new(0.4, 0.0, 0.0)], &[Vec3::zeros()]).unwrap();
        assert_eq!((m.acc_s, m.acc_r, m.r_outliers), (0.0, 0.0, 100.0));
        let m = flow_metrics(&[Vec3::zeros()], &[Vec3::zeros()]).unwrap();
        assert_eq!((m.acc_s, m.acc_r, m.r_outliers), (100.0, 100.0, 0.0));
    }

    #[test]
    fn metrics_length_mismatch() {
        assert!(flow_metrics(&[Vec3::zeros()], &[]).is_err());
        assert!(flow_metrics(&[], &[]).is_err());
    }
}
