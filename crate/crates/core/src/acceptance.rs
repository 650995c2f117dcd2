//! The acceptance suite: one check per criterion, each returning a
//! pass/fail line. Shared by the `verify` subcommand and the `acceptance`
//! test target.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::collab::{
    box_to_modar, pool_box_velocity, propagate_modar, CollabConfig, Estimator, Simulation, StrategyId,
};
use crate::detector::NoiseProfile;
use crate::error::{Error, Result};
use crate::eval::{average_precision, THRESHOLDS};
use crate::experiment::{
    run_experiment, run_seed, sweep_agents, sweep_heterogeneity, write_artifacts, ExperimentConfig,
};
use crate::flow::{flow_metrics, perturb_flow, FlowNoiseProfile, FlowVector};
use crate::geometry::{emc_concatenate, point_in_box, rectify_point, BoundingBox, Vec3};
use crate::rng::{self, Module};
use crate::scene::{generate_scenario, scan_sequence, sequence_times, snap_time, GtMode, Motion, ScenarioParams};
use crate::v2x::{encode_detection, encode_early, DetectionEntry, DetectionMessage};

/// Shipped configuration for the ego-only false-positive pollution check.
pub const EGO_ONLY_POLLUTION_CONFIG: &str = include_str!("../configs/ego_only_pollution.toml");

/// Seeds for the strategy-ordering ensembles.
pub const ENSEMBLE_SEEDS: u64 = 30;
/// Seeds for the agent-count and heterogeneity sweeps.
pub const SWEEP_SEEDS: u64 = 12;

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "rectification exactness"),
    (2, "propagation exactness"),
    (3, "mAP oracle equivalence"),
    (4, "strategy ordering (any_agent)"),
    (5, "propagation recovery ratio"),
    (6, "late pollution under ego_only"),
    (7, "bandwidth"),
    (8, "flow metrics"),
    (9, "network-size sweep"),
    (10, "heterogeneity sweep"),
    (11, "determinism"),
    (12, "end-to-end budget"),
];

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2} {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

type Outcome = Result<(bool, String)>;

/// Runs criterion `id` (1..=12).
pub fn run_criterion(id: u8) -> CriterionReport {
    let name = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .unwrap_or("unknown criterion");
    let start = Instant::now();
    let outcome = match id {
        1 => rectification_exactness(),
        2 => propagation_exactness(),
        3 => map_oracle_equivalence(),
        4 => strategy_ordering(),
        5 => recovery_ratio(),
        6 => ego_only_pollution(),
        7 => bandwidth(),
        8 => flow_metric_checks(),
        9 => network_size_sweep(),
        10 => heterogeneity(),
        11 => determinism(),
        12 => end_to_end_budget(),
        _ => Err(Error::contract(format!("no criterion {id}"))),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionReport {
        id,
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

pub fn run_all() -> Vec<CriterionReport> {
    CRITERIA.iter().map(|(id, _)| run_criterion(*id)).collect()
}

fn rectification_exactness() -> Outcome {
    let start = Instant::now();
    let params = ScenarioParams {
        object_count: 12,
        dynamic_fraction: 1.0,
        turning_fraction: 0.0,
        agent_count: 1,
        frames: 4,
        ..ScenarioParams::default()
    };
    let (mut worst, mut checked) = (0.0f64, 0usize);
    for scenario in 0..100u64 {
        let world = generate_scenario(&params, 10_000 + scenario)?;
        let ego = world.ego();
        let t = snap_time(3.0 / params.frame_rate);
        let seq = scan_sequence(&world, ego, t, 3)?;
        let poses = sequence_times(world.frame_rate, t, 3)
            .iter()
            .map(|ts| ego.pose_at(*ts))
            .collect::<Result<Vec<_>>>()?;
        let cloud = emc_concatenate(&seq, &poses)?;
        let now = world
            .trajectories
            .iter()
            .map(|tr| Ok((tr.pose_at(t)?, tr.box_at(t)?)))
            .collect::<Result<Vec<_>>>()?;
        for p in &cloud.points {
            let source = snap_time(t - p.time_lag);
            for (i, tr) in world.trajectories.iter().enumerate() {
                if point_in_box(&p.position, &tr.box_at(source)?) {
                    let x = rectify_point(&p.position, &tr.pose_at(source)?, &now[i].0);
                    worst = worst.max(now[i].1.surface_distance(&x));
                    checked += 1;
                    break;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        checked > 0 && worst <= 1e-9 && secs < 10.0,
        format!("{checked} object points over 100 scenarios, max surface distance {worst:.3e} m (limit 1e-9), {secs:.1} s (limit 10)"),
    ))
}

fn exact_collab(estimator: Estimator, lag: f64) -> CollabConfig {
    let mut cfg = CollabConfig {
        estimator,
        async_lag: lag,
        flow_noise: FlowNoiseProfile::EXACT,
        ..CollabConfig::default()
    };
    for p in cfg.profiles.values_mut() {
        *p = NoiseProfile::exact(&p.name);
    }
    cfg
}

fn propagation_exactness() -> Outcome {
    let params = ScenarioParams {
        dynamic_fraction: 1.0,
        turning_fraction: 0.0,
        object_count: 24,
        ..ScenarioParams::default()
    };
    let t = snap_time(13.0 / params.frame_rate);
    let (mut worst, mut checked, mut unobservable) = (0.0f64, 0usize, 0usize);
    let (mut eq5_checked, mut eq5_mismatch) = (0usize, 0usize);
    for seed in 1..=3u64 {
        let world = generate_scenario(&params, seed)?;
        let ego = world.ego().agent_id;
        for lag in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let t_i = snap_time(t - lag);
            let cfg = exact_collab(Estimator::LagWeighted, lag);
            let sim = Simulation::new(&world, &cfg, seed)?;
            let eq5_cfg = exact_collab(Estimator::Eq5, lag);
            let eq5_sim = Simulation::new(&world, &eq5_cfg, seed)?;
            for agent in world.agents.iter().filter(|a| a.agent_id != ego) {
                let frame = sim.agent_frame(agent.agent_id, t_i)?;
                let msg = sim.detection_message(&frame)?;
                for e in &msg.entries {
                    let global = msg.pose.transform_point(&e.bbox.center);
                    let Some(tr) = world.trajectories.iter().find(|tr| {
                        tr.box_at(t_i)
                            .map(|b| (b.center - global).norm() < 1e-6)
                            .unwrap_or(false)
                    }) else {
                        continue;
                    };
                    if !matches!(tr.motion, Motion::ConstantVelocity { .. }) {
                        continue;
                    }
                    let region = BoundingBox {
                        size: e.bbox.size + Vec3::repeat(2.0 * cfg.pool_margin),
                        ..e.bbox
                    };
                    if pool_box_velocity(&region, &frame.rectified, &frame.flows)?.empty {
                        unobservable += 1;
                        continue;
                    }
                    let m = propagate_modar(&box_to_modar(&e.bbox, e.flow, msg.agent_id, msg.t_i), t, msg.span)?;
                    let err = (msg.pose.transform_point(&m.position) - tr.box_at(t)?.center).norm();
                    worst = worst.max(err);
                    checked += 1;
                }
                let eq5_frame = eq5_sim.agent_frame(agent.agent_id, t_i)?;
                let eq5_msg = eq5_sim.detection_message(&eq5_frame)?;
                for e in &eq5_msg.entries {
                    let m = propagate_modar(
                        &box_to_modar(&e.bbox, e.flow, eq5_msg.agent_id, eq5_msg.t_i),
                        t,
                        eq5_msg.span,
                    )?;
                    let factor = (t - eq5_msg.t_i) / eq5_msg.span;
                    let scalar = [
                        e.bbox.center.x + e.flow.x * factor,
                        e.bbox.center.y + e.flow.y * factor,
                        e.bbox.center.z + e.flow.z * factor,
                    ];
                    eq5_checked += 1;
                    if (0..3).any(|k| m.position[k].to_bits() != scalar[k].to_bits()) {
                        eq5_mismatch += 1;
                    }
                }
            }
        }
    }
    Ok((
        checked > 0 && worst < 1e-6 && eq5_checked > 0 && eq5_mismatch == 0,
        format!(
            "lag-weighted: {checked} boxes, max error {worst:.3e} m (limit 1e-6), {unobservable} skipped with no lagged points; eq5: {eq5_checked} boxes, {eq5_mismatch} bitwise mismatches"
        ),
    ))
}

/// Brute-force AP: every distinct score cutoff is an operating point,
/// matched from scratch.
pub fn brute_force_ap(dets: &[BoundingBox], gts: &[BoundingBox], threshold: f64) -> f64 {
    if gts.is_empty() {
        return if dets.is_empty() { 1.0 } else { 0.0 };
    }
    let mut cutoffs: Vec<f64> = dets.iter().map(|d| d.score).collect();
    cutoffs.sort_by(|a, b| b.total_cmp(a));
    cutoffs.dedup();
    let mut points = Vec::new();
    for c in cutoffs {
        let mut kept: Vec<usize> = (0..dets.len()).filter(|i| dets[*i].score >= c).collect();
        kept.sort_by(|a, b| dets[*b].score.total_cmp(&dets[*a].score).then(a.cmp(b)));
        let mut used = vec![false; gts.len()];
        let mut tp = 0usize;
        for d in &kept {
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if used[g] {
                    continue;
                }
                let dist =
                    ((dets[*d].center.x - gt.center.x).powi(2) + (dets[*d].center.y - gt.center.y).powi(2)).sqrt();
                if dist <= threshold && best.is_none_or(|(_, bd)| dist < bd) {
                    best = Some((g, dist));
                }
            }
            if let Some((g, _)) = best {
                used[g] = true;
                tp += 1;
            }
        }
        points.push((tp as f64 / gts.len() as f64, tp as f64 / kept.len() as f64));
    }
    let mut area = 0.0;
    for j in 11..=100 {
        let r = j as f64 / 100.0;
        let p = points
            .iter()
            .filter(|(rec, _)| *rec + 1e-12 >= r)
            .map(|(_, prec)| *prec)
            .fold(0.0, f64::max);
        area += (p - 0.1).max(0.0) * 0.01;
    }
    (area / 0.81).clamp(0.0, 1.0)
}

fn map_oracle_equivalence() -> Outcome {
    let mut rng = rng::stream(3, Module::Test, 0, 0, 0);
    let (mut worst, instances) = (0.0f64, 400usize);
    for _ in 0..instances {
        let n_gt = rng.random_range(0..=10usize);
        let n_det = rng.random_range(0..=10usize);
        let gts: Vec<BoundingBox> = (0..n_gt)
            .map(|_| {
                BoundingBox::new(
                    Vec3::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0), 0.0),
                    Vec3::new(4.5, 1.9, 1.6),
                    0.0,
                    1.0,
                    0,
                )
            })
            .collect();
        let dets: Vec<BoundingBox> = (0..n_det)
            .map(|_| {
                let anchor = if !gts.is_empty() && rng.random_bool(0.7) {
                    gts[rng.random_range(0..gts.len())].center
                } else {
                    Vec3::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0), 0.0)
                };
                let jitter = Vec3::new(rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5), 0.0);
                let score = (rng.random_range(1..=10) as f64) / 10.0;
                BoundingBox::new(anchor + jitter, Vec3::new(4.5, 1.9, 1.6), 0.0, score, 0)
            })
            .collect();
        let thr = THRESHOLDS[rng.random_range(0..THRESHOLDS.len())];
        worst = worst.max((average_precision(&dets, &gts, thr) - brute_force_ap(&dets, &gts, thr)).abs());
    }
    Ok((
        worst <= 1e-12,
        format!("{instances} random instances (<= 20 boxes), max |AP - brute force| = {worst:.3e} (limit 1e-12)"),
    ))
}

struct Ensemble {
    means: Vec<(StrategyId, f64)>,
    secs: f64,
    dynamic_fraction: f64,
}

impl Ensemble {
    fn mean(&self, s: StrategyId) -> f64 {
        self.means
            .iter()
            .find(|(id, _)| *id == s)
            .map(|(_, m)| *m)
            .unwrap_or(f64::NAN)
    }

    fn describe(&self) -> String {
        self.means
            .iter()
            .map(|(s, m)| format!("{s} {:.2}", 100.0 * m))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

const ORDERING_STRATEGIES: [StrategyId; 5] = [
    StrategyId::None,
    StrategyId::LateAsync,
    StrategyId::LateAsyncProp,
    StrategyId::LateSync,
    StrategyId::LateEarly,
];

fn ensemble(mut cfg: ExperimentConfig, gt_mode: GtMode) -> Result<Ensemble> {
    cfg.strategies = ORDERING_STRATEGIES.to_vec();
    cfg.gt_modes = vec![gt_mode];
    let start = Instant::now();
    let outcome = run_experiment(&cfg)?;
    let means = ORDERING_STRATEGIES
        .iter()
        .map(|s| {
            let m = outcome
                .summary
                .iter()
                .find(|r| r.strategy == s.as_str())
                .map(|r| r.map_mean)
                .unwrap_or(f64::NAN);
            (*s, m)
        })
        .collect();
    Ok(Ensemble {
        means,
        secs: start.elapsed().as_secs_f64(),
        dynamic_fraction: cfg.scenario.dynamic_fraction,
    })
}

fn default_ensemble() -> Result<&'static Ensemble> {
    static CELL: std::sync::OnceLock<std::result::Result<Ensemble, String>> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = ExperimentConfig {
            seeds: (1..=ENSEMBLE_SEEDS).collect(),
            ..ExperimentConfig::default()
        };
        ensemble(cfg, GtMode::AnyAgent).map_err(|e| e.to_string())
    })
    .as_ref()
    .map_err(|e| Error::Contract(e.clone()))
}

fn strategy_ordering() -> Outcome {
    let e = default_ensemble()?;
    let none = e.mean(StrategyId::None);
    let late = e.mean(StrategyId::LateAsync);
    let prop = e.mean(StrategyId::LateAsyncProp);
    let sync = e.mean(StrategyId::LateSync);
    let le = e.mean(StrategyId::LateEarly);
    let ordered = none < late && late < prop && prop <= sync && le > prop;
    Ok((
        ordered && e.dynamic_fraction >= 0.3 && e.secs < 600.0,
        format!(
            "{ENSEMBLE_SEEDS} seeds, dynamic fraction {:.2}: {}; {:.0} s (limit 600)",
            e.dynamic_fraction,
            e.describe(),
            e.secs
        ),
    ))
}

fn recovery_ratio() -> Outcome {
    let e = default_ensemble()?;
    let late = e.mean(StrategyId::LateAsync);
    let ratio = (e.mean(StrategyId::LateAsyncProp) - late) / (e.mean(StrategyId::LateSync) - late);
    Ok((
        ratio >= 0.85,
        format!("(PROP - ASYNC) / (SYNC - ASYNC) = {ratio:.3} (limit 0.85)"),
    ))
}

fn ego_only_pollution() -> Outcome {
    let cfg = ExperimentConfig::from_toml_str(EGO_ONLY_POLLUTION_CONFIG)?;
    let e = ensemble(cfg, GtMode::EgoOnly)?;
    let none = e.mean(StrategyId::None);
    let late_below = [StrategyId::LateSync, StrategyId::LateAsync, StrategyId::LateAsyncProp]
        .iter()
        .all(|s| e.mean(*s) < none);
    Ok((
        late_below && e.mean(StrategyId::LateEarly) >= none,
        format!("configs/ego_only_pollution.toml, ego_only: {}", e.describe()),
    ))
}

fn bandwidth() -> Outcome {
    let entries = (0..100)
        .map(|i| DetectionEntry {
            bbox: BoundingBox::new(
                Vec3::new(i as f64, -(i as f64), 0.5),
                Vec3::new(4.5, 1.9, 1.6),
                0.1,
                0.8,
                0,
            ),
            flow: Vec3::new(0.5, 0.0, 0.0),
        })
        .collect();
    let det = DetectionMessage {
        agent_id: 2,
        t_i: 1.0,
        pose: crate::geometry::Pose::identity(),
        span: 0.6,
        entries,
    };
    let det_bytes = encode_detection(&det)?.len();
    let world = generate_scenario(&ScenarioParams::default(), 1)?;
    let collab = CollabConfig::default();
    let sim = Simulation::new(&world, &collab, 1)?;
    let ego = world.ego().agent_id;
    let first = collab.sequence_length - 1;
    let mut early_bytes = 0usize;
    for k in first..first + 10 {
        let frame = sim.agent_frame(ego, snap_time(k as f64 / world.frame_rate))?;
        early_bytes += encode_early(&sim.early_message(&frame))?.len();
    }
    let ratio = early_bytes as f64 / det_bytes as f64;
    Ok((
        det_bytes <= 10_000 && ratio >= 100.0,
        format!(
            "100-box detection message {det_bytes} B (limit 10000 B = 0.01 MB); 10 early messages ({}-scan sequences) {:.2} MB = {ratio:.0}x (limit 100x)",
            collab.sequence_length,
            early_bytes as f64 / 1e6
        ),
    ))
}

fn flow_metric_checks() -> Outcome {
    let mut rng = rng::stream(8, Module::Test, 0, 0, 0);
    let n = 100_000;
    let gt: Vec<FlowVector> = (0..n)
        .map(|_| Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.0))
        .collect();
    let exact = flow_metrics(&gt, &gt)?;
    let exact_ok = exact.epe == 0.0 && exact.acc_s == 100.0 && exact.acc_r == 100.0 && exact.r_outliers == 0.0;
    let sigma = 0.05;
    let noise = FlowNoiseProfile {
        sigma,
        miss_rate: 0.0,
        false_rate: 0.0,
    };
    let noisy = perturb_flow(&gt, &vec![true; n], &noise, 99)?;
    let epe = flow_metrics(&noisy, &gt)?.epe;
    // Independent Monte-Carlo estimate of E|N(0, sigma^2 I_3)|.
    let mut mc_rng = rng::stream(80, Module::Test, 1, 0, 0);
    let expected = (0..n)
        .map(|_| {
            let z: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut mc_rng));
            sigma * (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt()
        })
        .sum::<f64>()
        / n as f64;
    let rel = (epe - expected).abs() / expected;
    Ok((
        exact_ok && rel <= 0.05,
        format!(
            "exact: EPE {} AccS {} AccR {} ROutliers {}; sigma 0.05 over 1e5 points: EPE {epe:.5} vs Monte-Carlo {expected:.5} ({:.2}% off, limit 5%)",
            exact.epe,
            exact.acc_s,
            exact.acc_r,
            exact.r_outliers,
            100.0 * rel
        ),
    ))
}

fn network_size_sweep() -> Outcome {
    let cfg = ExperimentConfig {
        seeds: (1..=SWEEP_SEEDS).collect(),
        ..ExperimentConfig::default()
    };
    let rows = sweep_agents(&cfg, 1..=cfg.scenario.agent_count)?;
    let steps: Vec<f64> = rows.windows(2).map(|w| w[1].map_mean - w[0].map_mean).collect();
    let tolerated = rows
        .windows(2)
        .all(|w| w[1].map_mean - w[0].map_mean >= -w[0].map_sem.max(w[1].map_sem));
    let irsu_largest = steps.first().is_some_and(|first| steps.iter().all(|s| s <= first));
    let series = rows
        .iter()
        .map(|r| format!("{}:{:.2}", r.agents, 100.0 * r.map_mean))
        .collect::<Vec<_>>()
        .join(" ");
    Ok((
        rows.len() == 6 && tolerated && irsu_largest,
        format!(
            "{SWEEP_SEEDS} seeds, {} any_agent: {series}; IRSU step {:.2}",
            cfg.sweep_strategy,
            100.0 * steps.first().copied().unwrap_or(f64::NAN)
        ),
    ))
}

fn heterogeneity() -> Outcome {
    let cfg = ExperimentConfig {
        seeds: (1..=SWEEP_SEEDS).collect(),
        ..ExperimentConfig::default()
    };
    let rows = sweep_heterogeneity(&cfg)?;
    let above = rows.iter().all(|r| r.map_mean >= r.late_async_prop_mean);
    let n = rows.len() as f64;
    let mx = rows.iter().map(|r| r.profile_s_agents as f64).sum::<f64>() / n;
    let my = rows.iter().map(|r| r.map_mean).sum::<f64>() / n;
    let slope = rows
        .iter()
        .map(|r| (r.profile_s_agents as f64 - mx) * (r.map_mean - my))
        .sum::<f64>()
        / rows
            .iter()
            .map(|r| (r.profile_s_agents as f64 - mx).powi(2))
            .sum::<f64>();
    let downward = slope < 0.0 && rows.last().map(|r| r.map_mean) < rows.first().map(|r| r.map_mean);
    let series = rows
        .iter()
        .map(|r| {
            format!(
                "{}:{:.2}/{:.2}",
                r.profile_s_agents,
                100.0 * r.map_mean,
                100.0 * r.late_async_prop_mean
            )
        })
        .collect::<Vec<_>>()
        .join(" ");
    Ok((
        above && downward,
        format!(
            "{SWEEP_SEEDS} seeds, mix:{}/LATE_ASYNC_PROP {series}; slope {:.3} per agent",
            cfg.sweep_strategy,
            100.0 * slope
        ),
    ))
}

fn scratch_dir(tag: &str) -> PathBuf {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    std::env::temp_dir().join(format!("modar-acceptance-{tag}-{}-{nanos}", std::process::id()))
}

fn determinism() -> Outcome {
    let mut csvs = Vec::new();
    for (run, parallel) in [(0, 1usize), (1, 2)] {
        let cfg = ExperimentConfig {
            parallel,
            ..ExperimentConfig::default()
        };
        let dir = scratch_dir(&format!("det{run}"));
        let outcome = run_experiment(&cfg)?;
        write_artifacts(&outcome, &cfg, &dir)?;
        let path = dir.join("results.csv");
        let bytes = fs::read(&path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let _ = fs::remove_dir_all(&dir);
        csvs.push(bytes);
    }
    Ok((
        !csvs[0].is_empty() && csvs[0] == csvs[1],
        format!(
            "default experiment twice (1 and 2 workers): results.csv {} B, identical = {}",
            csvs[0].len(),
            csvs[0] == csvs[1]
        ),
    ))
}

fn end_to_end_budget() -> Outcome {
    let mut cfg = ExperimentConfig {
        seeds: vec![1],
        parallel: 1,
        ..ExperimentConfig::default()
    };
    cfg.scenario.frames = 100;
    cfg.validate()?;
    let start = Instant::now();
    let runs = run_seed(&cfg, 1)?;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        secs < 60.0 && runs.len() == 6 * cfg.gt_modes.len(),
        format!(
            "100 frames, {} agents, {} strategies, 1 seed on 1 worker: {secs:.1} s (limit 60)",
            cfg.scenario.agent_count,
            cfg.strategies.len()
        ),
    ))
}
