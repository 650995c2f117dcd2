//! Library results against independent reference computations written
//! directly in the test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use modar_v2x::acceptance::brute_force_ap;
use modar_v2x::collab::{box_to_modar, pool_box_velocity, pooled_flow, propagate_modar, Estimator};
use modar_v2x::eval::{average_precision, THRESHOLDS};
use modar_v2x::flow::{flow_metrics, perturb_flow, FlowNoiseProfile};
use modar_v2x::geometry::{bev_iou, BoundingBox, Frame, LidarPoint, PointCloud, Vec3};

fn car(x: f64, y: f64, score: f64) -> BoundingBox {
    BoundingBox::new(Vec3::new(x, y, 0.0), Vec3::new(4.0, 2.0, 1.5), 0.0, score, 0)
}

/// Greedy matching and precision/recall at every distinct cutoff, with
/// interpolated precision read off the 101-point recall grid.
fn reference_ap(dets: &[BoundingBox], gts: &[BoundingBox], thr: f64) -> f64 {
    if gts.is_empty() {
        return if dets.is_empty() { 1.0 } else { 0.0 };
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|a, b| dets[*b].score.partial_cmp(&dets[*a].score).unwrap().then(a.cmp(b)));
    let mut pr = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let cutoff = dets[order[i]].score;
        let mut j = i;
        while j < order.len() && dets[order[j]].score == cutoff {
            j += 1;
        }
        let mut free = vec![true; gts.len()];
        let mut tp = 0.0;
        for &d in &order[..j] {
            let (dx, dy) = (dets[d].center.x, dets[d].center.y);
            let best = (0..gts.len())
                .filter(|g| free[*g])
                .map(|g| {
                    (
                        g,
                        ((gts[g].center.x - dx).powi(2) + (gts[g].center.y - dy).powi(2)).sqrt(),
                    )
                })
                .filter(|(_, dist)| *dist <= thr)
                .fold(None::<(usize, f64)>, |acc, c| match acc {
                    Some(a) if a.1 <= c.1 => Some(a),
                    _ => Some(c),
                });
            if let Some((g, _)) = best {
                free[g] = false;
                tp += 1.0;
            }
        }
        pr.push((tp / gts.len() as f64, tp / j as f64));
        i = j;
    }
    let mut total = 0.0;
    for k in 11..=100 {
        let r = k as f64 / 100.0;
        let p = pr.iter().filter(|x| x.0 >= r - 1e-12).map(|x| x.1).fold(0.0, f64::max);
        total += if p > 0.1 { (p - 0.1) * 0.01 } else { 0.0 };
    }
    total / 0.81
}

#[test]
fn hand_computed_ap_with_late_true_positive() {
    let gts = [car(0.0, 0.0, 1.0)];
    let dets = [car(30.0, 0.0, 0.9), car(0.2, 0.0, 0.8)];
    let expected = 0.4 * 0.9 / 0.81;
    assert!((average_precision(&dets, &gts, 1.0) - expected).abs() < 1e-12);
    assert!((reference_ap(&dets, &gts, 1.0) - expected).abs() < 1e-12);
}

#[test]
fn ap_matches_reference_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..500 {
        let gts: Vec<_> = (0..rng.random_range(0..8))
            .map(|_| car(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), 1.0))
            .collect();
        let dets: Vec<_> = (0..rng.random_range(0..12))
            .map(|_| {
                let (x, y) = match gts.len() {
                    0 => (0.0, 0.0),
                    n => {
                        let g = &gts[rng.random_range(0..n)];
                        (g.center.x, g.center.y)
                    }
                };
                car(
                    x + rng.random_range(-3.0..3.0),
                    y + rng.random_range(-3.0..3.0),
                    f64::from(rng.random_range(1..6u8)) / 5.0,
                )
            })
            .collect();
        for thr in THRESHOLDS {
            let want = reference_ap(&dets, &gts, thr);
            assert!((average_precision(&dets, &gts, thr) - want).abs() < 1e-12);
            assert!((brute_force_ap(&dets, &gts, thr) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn bev_iou_matches_grid_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let a = BoundingBox::new(
            Vec3::zeros(),
            Vec3::new(rng.random_range(1.0..5.0), rng.random_range(1.0..3.0), 1.0),
            rng.random_range(-3.0..3.0),
            1.0,
            0,
        );
        let b = BoundingBox::new(
            Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.0),
            Vec3::new(rng.random_range(1.0..5.0), rng.random_range(1.0..3.0), 1.0),
            rng.random_range(-3.0..3.0),
            1.0,
            0,
        );
        let inside = |bx: &BoundingBox, x: f64, y: f64| {
            let (s, c) = bx.yaw.sin_cos();
            let (dx, dy) = (x - bx.center.x, y - bx.center.y);
            (c * dx + s * dy).abs() <= bx.size.x / 2.0 && (-s * dx + c * dy).abs() <= bx.size.y / 2.0
        };
        let (n, h) = (800, 0.01);
        let (mut inter, mut union) = (0u32, 0u32);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (-4.0 + (i as f64 + 0.5) * h, -4.0 + (j as f64 + 0.5) * h);
                let (ia, ib) = (inside(&a, x, y), inside(&b, x, y));
                inter += u32::from(ia && ib);
                union += u32::from(ia || ib);
            }
        }
        let grid = f64::from(inter) / f64::from(union);
        assert!((bev_iou(&a, &b) - grid).abs() < 5e-3, "{} vs {grid}", bev_iou(&a, &b));
    }
}

#[test]
fn lag_weighted_velocity_matches_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b = BoundingBox::new(Vec3::zeros(), Vec3::new(4.0, 2.0, 2.0), 0.0, 1.0, 0);
    let v = Vec3::new(3.0, -1.0, 0.0);
    let mut points = Vec::new();
    let mut flows = Vec::new();
    for _ in 0..200 {
        let lag = [0.0, 0.2, 0.4][rng.random_range(0..3)];
        points.push(LidarPoint::new(
            Vec3::new(rng.random_range(-1.9..1.9), rng.random_range(-0.9..0.9), 0.0),
            0.5,
            lag,
        ));
        flows.push(v * lag + Vec3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), 0.0));
    }
    let cloud = PointCloud {
        points: points.clone(),
        frame: Frame::Global,
        timestamp: 1.0,
    };
    let (mut num, mut den) = ([0.0; 3], 0.0);
    for (p, f) in points.iter().zip(&flows) {
        for k in 0..3 {
            num[k] += p.time_lag * f[k];
        }
        den += p.time_lag * p.time_lag;
    }
    let pooled = pool_box_velocity(&b, &cloud, &flows).unwrap();
    assert!(!pooled.empty);
    for k in 0..3 {
        assert!((pooled.flow[k] - num[k] / den).abs() < 1e-12);
    }
    let span = 0.6;
    let transmitted = pooled_flow(Estimator::LagWeighted, &b, &cloud, &flows, span).unwrap();
    assert!((transmitted.flow - pooled.flow * span).norm() < 1e-12);
}

#[test]
fn eq5_shift_matches_scalar_formula() {
    let b = BoundingBox::new(Vec3::new(3.0, 4.0, 0.5), Vec3::new(4.0, 2.0, 1.5), 0.0, 0.9, 0);
    let m = box_to_modar(&b, Vec3::new(1.0, 0.0, 0.0), 2, 1.0);
    let p = propagate_modar(&m, 1.2, 0.5).unwrap();
    let shift = p.position - m.position;
    assert!((shift - Vec3::new(0.4, 0.0, 0.0)).norm() < 1e-12);
}

#[test]
fn gaussian_epe_matches_chi_mean() {
    let sigma = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let gt: Vec<Vec3> = (0..100_000)
        .map(|_| Vec3::new(rng.random_range(-1.0..1.0), 0.0, 0.0))
        .collect();
    let noisy = perturb_flow(
        &gt,
        &vec![true; gt.len()],
        &FlowNoiseProfile {
            sigma,
            miss_rate: 0.0,
            false_rate: 0.0,
        },
        3,
    )
    .unwrap();
    let epe = flow_metrics(&noisy, &gt).unwrap().epe;
    let chi_mean = 2.0 * (2.0 / std::f64::consts::PI).sqrt() * sigma;
    assert!((epe - chi_mean).abs() / chi_mean < 0.05, "{epe} vs {chi_mean}");
}
