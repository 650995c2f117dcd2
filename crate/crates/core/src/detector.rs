//! Parametric single-agent detector and rotated-BEV non-max suppression.
//!
//! The detector does not look at point patterns; it decides, object by
//! object, whether the agent's cloud holds enough evidence and then emits a
//! noisy copy of the ground-truth box. MoDAR support from other agents lowers
//! the miss probability and the localization noise of supported objects.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::collab::ModarPoint;
use crate::error::{Error, Result};
use crate::geometry::{bev_iou, normalize_angle, point_in_box, BoundingBox, Frame, PointCloud, Vec3};
use crate::rng::{self, Module};
use crate::scene::{in_detection_range, World, CLASS_VEHICLE, DETECTION_RANGE};

/// A MoDAR point supports an object when it lies in the object's box and
/// within this distance of the box centre.
pub const SUPPORT_RADIUS: f64 = 2.0;

/// Score multiplier for objects recovered from MoDAR support alone.
pub const MODAR_ONLY_SCORE_SCALE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseProfile {
    pub name: String,
    pub pos_sigma: f64,
    pub yaw_sigma: f64,
    pub size_sigma: f64,
    pub fn_base: f64,
    /// Point count at which the miss probability halves.
    pub fn_halflife: f64,
    /// Expected false positives per frame.
    pub fp_rate: f64,
    pub score_tp: BetaParams,
    pub score_fp: BetaParams,
    pub min_points: usize,
    pub modar_fn_discount: f64,
    pub modar_pos_gain: f64,
}

impl NoiseProfile {
    /// Stock profile for the stronger detector family.
    pub fn profile_p() -> Self {
        Self {
            name: "profile-P".into(),
            pos_sigma: 0.4,
            yaw_sigma: 0.05,
            size_sigma: 0.1,
            fn_base: 0.4,
            fn_halflife: 40.0,
            fp_rate: 1.5,
            score_tp: BetaParams { alpha: 6.0, beta: 2.0 },
            score_fp: BetaParams { alpha: 2.0, beta: 4.0 },
            min_points: 5,
            modar_fn_discount: 0.3,
            modar_pos_gain: 0.5,
        }
    }

    /// Stock profile for the weaker detector family.
    pub fn profile_s() -> Self {
        Self {
            name: "profile-S".into(),
            pos_sigma: 0.5,
            fn_base: 0.5,
            ..Self::profile_p()
        }
    }

    /// No noise, no misses, no false positives.
    pub fn exact(name: &str) -> Self {
        Self {
            name: name.into(),
            pos_sigma: 0.0,
            yaw_sigma: 0.0,
            size_sigma: 0.0,
            fn_base: 0.0,
            fp_rate: 0.0,
            min_points: 1,
            ..Self::profile_p()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.fn_base, self.modar_fn_discount, self.modar_pos_gain];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::contract(format!(
                "profile {}: probabilities must lie in [0, 1]",
                self.name
            )));
        }
        if [self.pos_sigma, self.yaw_sigma, self.size_sigma, self.fp_rate]
            .iter()
            .any(|s| *s < 0.0)
        {
            return Err(Error::contract(format!(
                "profile {}: sigmas and fp_rate must be >= 0",
                self.name
            )));
        }
        if self.fn_halflife <= 0.0 || self.min_points < 1 {
            return Err(Error::contract(format!(
                "profile {}: fn_halflife > 0 and min_points >= 1 required",
                self.name
            )));
        }
        for b in [self.score_tp, self.score_fp] {
            if b.alpha <= 0.0 || b.beta <= 0.0 {
                return Err(Error::contract(format!(
                    "profile {}: beta parameters must be positive",
                    self.name
                )));
            }
        }
        if self.score_tp.mean() <= self.score_fp.mean() {
            return Err(Error::contract(format!(
                "profile {}: true-positive scores must exceed false-positive scores on average",
                self.name
            )));
        }
        Ok(())
    }

    /// Probability that a candidate holding `points` points is missed.
    pub fn miss_probability(&self, points: usize) -> f64 {
        self.fn_base * (-(points as f64) / self.fn_halflife).exp2()
    }
}

fn beta_sample(rng: &mut ChaCha8Rng, p: BetaParams) -> f64 {
    Beta::new(p.alpha, p.beta)
        .expect("validated beta parameters")
        .sample(rng)
}

fn normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    std * z
}

/// Simulated detections for one agent at time `t`.
///
/// `cloud` is the agent's (flow-rectified) sequence in its own frame at `t`;
/// `modar_support` must be in the same frame. Boxes come back in that frame.
pub fn simulate_detections(
    cloud: &PointCloud,
    world: &World,
    t: f64,
    profile: &NoiseProfile,
    seed: u64,
    modar_support: Option<&[ModarPoint]>,
) -> Result<Vec<BoundingBox>> {
    profile.validate()?;
    let Frame::Agent(agent_id) = cloud.frame else {
        return Err(Error::contract("detector input must be in an agent frame"));
    };
    let agent = world
        .agent(agent_id)
        .ok_or_else(|| Error::contract(format!("unknown agent {agent_id}")))?;
    let to_agent = agent.pose_at(t)?.inverse();
    let support = modar_support.unwrap_or(&[]);

    let mut out = Vec::new();
    for (object_id, global_box) in world.object_boxes_at(t)? {
        let gt = to_agent.transform_box(&global_box);
        if !in_detection_range(&gt.center) {
            continue;
        }
        // All draws happen unconditionally so every object's stream stays
        // aligned whatever the support situation.
        let mut rng = rng::stream(seed, Module::Detector, agent_id as u64, 0, object_id as u64);
        let u_miss: f64 = rng.random();
        let u_emit: f64 = rng.random();
        let eps: [f64; 7] = std::array::from_fn(|_| normal(&mut rng, 1.0));
        let score = beta_sample(&mut rng, profile.score_tp);

        let points = cloud.points.iter().filter(|p| point_in_box(&p.position, &gt)).count();
        let best_support = support
            .iter()
            .filter(|m| point_in_box(&m.position, &gt) && (m.position - gt.center).norm() <= SUPPORT_RADIUS)
            .max_by(|a, b| a.feat_score.total_cmp(&b.feat_score));

        if points >= profile.min_points {
            let (mut miss, mut pos_std) = (profile.miss_probability(points), profile.pos_sigma);
            if best_support.is_some() {
                miss *= profile.modar_fn_discount;
                pos_std *= profile.modar_pos_gain;
            }
            if u_miss < miss {
                continue;
            }
            let center = gt.center + Vec3::new(eps[0], eps[1], eps[2]) * pos_std;
            let size = (gt.size + Vec3::new(eps[4], eps[5], eps[6]) * profile.size_sigma).map(|s| s.max(0.1));
            out.push(BoundingBox::new(
                center,
                size,
                gt.yaw + eps[3] * profile.yaw_sigma,
                score,
                gt.class_id,
            ));
        } else if let Some(m) = best_support {
            let emit = (1.0 - profile.fn_base) * (1.0 - profile.modar_fn_discount);
            if u_emit < emit {
                out.push(BoundingBox::new(
                    m.position,
                    m.feat_size,
                    m.feat_yaw,
                    MODAR_ONLY_SCORE_SCALE * m.feat_score,
                    m.feat_class,
                ));
            }
        }
    }

    let mut rng = rng::stream(seed, Module::FalsePositive, agent_id as u64, 0, 0);
    let count = if profile.fp_rate > 0.0 {
        Poisson::new(profile.fp_rate).expect("positive rate").sample(&mut rng) as usize
    } else {
        0
    };
    let ground = -agent.mount_height();
    for _ in 0..count {
        let size = Vec3::new(
            rng.random_range(3.9..5.0),
            rng.random_range(1.7..2.0),
            rng.random_range(1.4..1.9),
        );
        let center = Vec3::new(
            rng.random_range(-DETECTION_RANGE..DETECTION_RANGE),
            rng.random_range(-DETECTION_RANGE..DETECTION_RANGE),
            ground + size.z / 2.0,
        );
        let yaw = normalize_angle(rng.random_range(0.0..std::f64::consts::TAU));
        let score = beta_sample(&mut rng, profile.score_fp);
        out.push(BoundingBox::new(center, size, yaw, score, CLASS_VEHICLE));
    }
    Ok(out)
}

/// Descending score; ties by lower class id, then lower centre x.
pub fn score_order(a: &BoundingBox, b: &BoundingBox) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.class_id.cmp(&b.class_id))
        .then(a.center.x.total_cmp(&b.center.x))
}

/// Greedy rotated-BEV NMS. A box is dropped when its IoU with an already
/// kept, higher-ranked box exceeds `iou_threshold`. Output is score-sorted.
pub fn nms(boxes: &[BoundingBox], iou_threshold: f64) -> Result<Vec<BoundingBox>> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::contract("nms threshold must lie in (0, 1)"));
    }
    let mut sorted = boxes.to_vec();
    sorted.sort_by(score_order);
    let mut kept: Vec<BoundingBox> = Vec::with_capacity(sorted.len());
    for b in sorted {
        if kept.iter().all(|k| bev_iou(k, &b) <= iou_threshold) {
            kept.push(b);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{LidarPoint, Pose};
    use crate::scene::{AgentConfig, AgentKind, LidarSpec, Motion, Trajectory};

    fn b(x: f64, score: f64) -> BoundingBox {
        BoundingBox::new(Vec3::new(x, 0.0, 0.0), Vec3::new(4.0, 2.0, 1.5), 0.0, score, 0)
    }

    #[test]
    fn nms_examples() {
        assert_eq!(nms(&[b(0.0, 0.5)], 0.2).unwrap(), vec![b(0.0, 0.5)]);
        let out = nms(&[b(0.0, 0.8), b(0.0, 0.9)], 0.2).unwrap();
        assert_eq!(out, vec![b(0.0, 0.9)]);
        assert_eq!(nms(&[b(0.0, 0.8), b(20.0, 0.9)], 0.2).unwrap().len(), 2);
        assert!(nms(&[], 1.0).is_err());
    }

    #[test]
    fn nms_tie_break_is_deterministic() {
        let out = nms(&[b(0.5, 0.7), b(0.0, 0.7)], 0.2).unwrap();
        assert_eq!(out, vec![b(0.0, 0.7)]);
    }

    fn setup() -> (World, PointCloud) {
        let obj = |id, x: f64, y: f64| {
            Trajectory::new(
                id,
                0,
                Vec3::new(4.0, 2.0, 1.5),
                Motion::Static,
                Pose::from_translation(Vec3::new(x, y, 0.75)),
                0.0,
                5.0,
            )
            .unwrap()
        };
        let ego = Trajectory::new(
            1001,
            0,
            Vec3::new(4.6, 1.9, 1.6),
            Motion::Static,
            Pose::from_translation(Vec3::new(0.0, 0.0, 1.9)),
            0.0,
            5.0,
        )
        .unwrap();
        let world = World {
            trajectories: vec![obj(0, 10.0, 0.0), obj(1, -10.0, 5.0), obj(2, 0.0, 20.0)],
            agents: vec![AgentConfig {
                agent_id: 1,
                kind: AgentKind::Ego,
                trajectory: ego,
                lidar: LidarSpec::default(),
                detection_rate: 5.0,
                profile: "p".into(),
            }],
            frame_rate: 5.0,
            duration: 5.0,
        };
        // Points (agent frame, z offset by mount height) on objects 0 and 1 only.
        let pts = [
            Vec3::new(8.0, 0.0, -1.0),
            Vec3::new(8.0, 0.5, -1.2),
            Vec3::new(-8.0, 5.0, -1.0),
        ];
        let cloud = PointCloud {
            points: pts.iter().map(|p| LidarPoint::new(*p, 0.6, 0.0)).collect(),
            frame: Frame::Agent(1),
            timestamp: 1.0,
        };
        (world, cloud)
    }

    #[test]
    fn zero_noise_reproduces_visible_truth() {
        let (world, cloud) = setup();
        let dets = simulate_detections(&cloud, &world, 1.0, &NoiseProfile::exact("x"), 3, None).unwrap();
        assert_eq!(dets.len(), 2);
        let to_agent = world.ego().pose_at(1.0).unwrap().inverse();
        for id in [0usize, 1] {
            let gt = to_agent.transform_box(&world.trajectories[id].box_at(1.0).unwrap());
            assert!(dets
                .iter()
                .any(|d| (d.center - gt.center).norm() < 1e-12 && (d.size - gt.size).norm() < 1e-12));
        }
        assert!(dets.iter().all(|d| d.score > 0.0 && d.score < 1.0));
    }

    #[test]
    fn deterministic_for_seed() {
        let (world, cloud) = setup();
        let p = NoiseProfile::profile_p();
        let a = simulate_detections(&cloud, &world, 1.0, &p, 8, None).unwrap();
        let b = simulate_detections(&cloud, &world, 1.0, &p, 8, None).unwrap();
        assert_eq!(a, b);
    }

    fn modar_at(x: Vec3) -> ModarPoint {
        ModarPoint {
            position: x,
            feat_size: Vec3::new(4.0, 2.0, 1.5),
            feat_yaw: 0.0,
            feat_score: 0.8,
            feat_class: 0,
            pooled_flow: Vec3::zeros(),
            source_agent: 0,
            source_time: 1.0,
        }
    }

    #[test]
    fn unsupported_empty_object_never_emitted() {
        let (world, cloud) = setup();
        let p = NoiseProfile::exact("x");
        for seed in 0..20 {
            let dets = simulate_detections(&cloud, &world, 1.0, &p, seed, None).unwrap();
            assert!(dets.iter().all(|d| d.center.y < 15.0));
        }
    }

    #[test]
    fn modar_support_recovers_hidden_object() {
        let (world, cloud) = setup();
        let p = NoiseProfile::exact("x");
        // Object 2 sits at (0, 20) with the ground 1.9 m below the sensor.
        let support = [modar_at(Vec3::new(0.3, 20.0, -1.15))];
        let mut hits = 0;
        for seed in 0..200 {
            let dets = simulate_detections(&cloud, &world, 1.0, &p, seed, Some(&support)).unwrap();
            if let Some(d) = dets.iter().find(|d| d.center.y > 15.0) {
                assert_eq!(d.center, support[0].position);
                assert!((d.score - 0.72).abs() < 1e-12);
                hits += 1;
            }
        }
        // Emission probability (1 - 0) * (1 - 0.3) = 0.7.
        assert!((120..=160).contains(&hits), "{hits}");
    }

    #[test]
    fn far_modar_point_gives_no_support() {
        let (world, cloud) = setup();
        let support = [modar_at(Vec3::new(0.0, 24.0, -1.15))];
        for seed in 0..20 {
            let dets =
                simulate_detections(&cloud, &world, 1.0, &NoiseProfile::exact("x"), seed, Some(&support)).unwrap();
            assert!(dets.iter().all(|d| d.center.y < 15.0));
        }
    }

    #[test]
    fn stock_profiles_validate() {
        NoiseProfile::profile_p().validate().unwrap();
        NoiseProfile::profile_s().validate().unwrap();
        let mut bad = NoiseProfile::profile_p();
        bad.score_fp = BetaParams { alpha: 9.0, beta: 1.0 };
        assert!(bad.validate().is_err());
    }
}
