use proptest::prelude::*;

use modar_v2x::flow::flow_metrics;
use modar_v2x::geometry::{bev_iou, BoundingBox, LidarPoint, Pose, Vec3};
use modar_v2x::v2x::{
    decode_detection, decode_early, encode_detection, encode_early, DetectionEntry, DetectionMessage, EarlyMessage,
    MessageBus,
};

fn f32v() -> impl Strategy<Value = f64> {
    (-1.0e3f32..1.0e3f32).prop_map(f64::from)
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (f32v(), f32v(), f32v()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn pose() -> impl Strategy<Value = Pose> {
    (
        -std::f64::consts::PI..std::f64::consts::PI,
        -500.0..500.0,
        -500.0..500.0,
        -5.0..5.0,
    )
        .prop_map(|(yaw, x, y, z)| Pose::from_yaw(yaw, Vec3::new(x, y, z)))
}

fn bbox() -> impl Strategy<Value = BoundingBox> {
    (-50.0..50.0, -50.0..50.0, 0.3..8.0, 0.3..4.0, -3.2..3.2)
        .prop_map(|(x, y, l, w, yaw)| BoundingBox::new(Vec3::new(x, y, 0.8), Vec3::new(l, w, 1.6), yaw, 1.0, 0))
}

fn entry() -> impl Strategy<Value = DetectionEntry> {
    (vec3(), vec3(), f32v(), 0.0f32..1.0f32, 0u8..4, vec3()).prop_map(|(center, size, yaw, score, class_id, flow)| {
        DetectionEntry {
            bbox: BoundingBox {
                center,
                size: size.abs(),
                yaw,
                score: f64::from(score),
                class_id,
            },
            flow,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn detection_codec_roundtrips(
        agent_id in any::<u8>(),
        t_i in 0.0..1.0e4f64,
        pose in pose(),
        span in (0.01f32..10.0f32).prop_map(f64::from),
        entries in prop::collection::vec(entry(), 0..8),
    ) {
        let msg = DetectionMessage { agent_id, t_i, pose, span, entries };
        let bytes = encode_detection(&msg).unwrap();
        prop_assert_eq!(decode_detection(&bytes).unwrap(), msg);
    }

    #[test]
    fn early_codec_roundtrips(
        agent_id in any::<u8>(),
        t_i in 0.0..1.0e4f64,
        pose in pose(),
        points in prop::collection::vec((vec3(), 0.0f32..1.0f32, 0.0f32..1.0f32), 0..16),
    ) {
        let points = points
            .into_iter()
            .map(|(p, i, l)| LidarPoint::new(p, f64::from(i), f64::from(l)))
            .collect();
        let msg = EarlyMessage { agent_id, t_i, pose, points };
        let bytes = encode_early(&msg).unwrap();
        prop_assert_eq!(decode_early(&bytes).unwrap(), msg);
    }
}

proptest! {
    #[test]
    fn pose_inverse_is_identity(p in pose(), x in vec3()) {
        let back = p.inverse().transform_point(&p.transform_point(&x));
        prop_assert!((back - x).norm() < 1e-9);
        let composed = p.compose(&p.inverse());
        prop_assert!((composed.rotation - nalgebra_identity()).norm() < 1e-12);
        prop_assert!(composed.translation.norm() < 1e-9);
    }

    #[test]
    fn bev_iou_is_symmetric_and_bounded(a in bbox(), b in bbox()) {
        let ab = bev_iou(&a, &b);
        prop_assert!((ab - bev_iou(&b, &a)).abs() < 1e-9);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((bev_iou(&a, &a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bev_iou_is_rigid_invariant(a in bbox(), b in bbox(), p in pose()) {
        let moved = bev_iou(&p.transform_box(&a), &p.transform_box(&b));
        prop_assert!((moved - bev_iou(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn bus_query_never_goes_back_in_time(
        stamps in prop::collection::vec(0u32..50, 1..20),
        latency in 0.0..0.5f64,
        t1 in 0.0..12.0f64,
        dt in 0.0..5.0f64,
    ) {
        let mut stamps = stamps;
        stamps.sort_unstable();
        let bus = MessageBus::new();
        for s in &stamps {
            bus.publish(DetectionMessage {
                agent_id: 3,
                t_i: f64::from(*s) * 0.2,
                pose: Pose::identity(),
                span: 0.6,
                entries: Vec::new(),
            }, latency).unwrap();
        }
        let early = bus.query(t1, 0).get(&3).map(|m| m.t_i);
        let late = bus.query(t1 + dt, 0).get(&3).map(|m| m.t_i);
        if let Some(e) = early {
            prop_assert!(e <= t1);
            prop_assert!(late.is_some_and(|l| l >= e));
        }
    }

    #[test]
    fn strict_accuracy_never_exceeds_relaxed(
        pairs in prop::collection::vec((vec3(), vec3()), 1..64),
        scale in 1.0e-4..1.0f64,
    ) {
        let gt: Vec<Vec3> = pairs.iter().map(|(g, _)| *g * 1e-3).collect();
        let pred: Vec<Vec3> = pairs.iter().zip(&gt).map(|((_, n), g)| g + n * scale * 1e-3).collect();
        let m = flow_metrics(&pred, &gt).unwrap();
        prop_assert!(m.acc_s <= m.acc_r);
        prop_assert!(m.epe >= 0.0);
    }
}

fn nalgebra_identity() -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::identity()
}
