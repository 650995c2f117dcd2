use modar_v2x::collab::{CollabConfig, Simulation, StrategyId};
use modar_v2x::detector::NoiseProfile;
use modar_v2x::flow::FlowNoiseProfile;
use modar_v2x::scene::{generate_scenario, in_detection_range, snap_time, GtMode, ScenarioParams};

fn exact_config() -> CollabConfig {
    let mut cfg = CollabConfig {
        flow_noise: FlowNoiseProfile::EXACT,
        ..CollabConfig::default()
    };
    for p in cfg.profiles.values_mut() {
        *p = NoiseProfile::exact(&p.name);
    }
    cfg
}

#[test]
fn none_is_the_ego_detector() {
    let world = generate_scenario(&ScenarioParams::default(), 4).unwrap();
    let cfg = CollabConfig::default();
    let sim = Simulation::new(&world, &cfg, 4).unwrap();
    let t = snap_time(2.0);
    let out = sim.run(StrategyId::None, t).unwrap();
    let frame = sim.agent_frame(world.ego().agent_id, t).unwrap();
    let own: Vec<_> = frame
        .detections
        .iter()
        .filter(|b| in_detection_range(&b.center))
        .copied()
        .collect();
    assert_eq!(out.detections, own);
    assert_eq!(out.bytes_exchanged, 0);
}

#[test]
fn exact_late_sync_recovers_visible_ground_truth() {
    for seed in 1..=3 {
        let world = generate_scenario(&ScenarioParams::default(), seed).unwrap();
        let cfg = exact_config();
        let sim = Simulation::new(&world, &cfg, seed).unwrap();
        let t = snap_time(2.0);
        let out = sim.run(StrategyId::LateSync, t).unwrap();
        let gts = sim.ground_truth(t, GtMode::AnyAgent).unwrap();
        assert_eq!(out.detections.len(), gts.len(), "seed {seed}");
        for g in &gts {
            assert!(
                out.detections.iter().any(|d| (d.center - g.center).norm() < 1e-6),
                "seed {seed}: no detection at {:?}",
                g.center
            );
        }
    }
}

#[test]
fn bandwidth_accounting() {
    let world = generate_scenario(&ScenarioParams::default(), 2).unwrap();
    let cfg = CollabConfig::default();
    let sim = Simulation::new(&world, &cfg, 2).unwrap();
    let t = snap_time(2.0);
    let late = sim.run(StrategyId::LateAsync, t).unwrap();
    let prop = sim.run(StrategyId::LateAsyncProp, t).unwrap();
    let late_early = sim.run(StrategyId::LateEarly, t).unwrap();
    let early = sim.run(StrategyId::Early, t).unwrap();
    assert!(late.bytes_exchanged > 0);
    assert_eq!(late.bytes_exchanged, prop.bytes_exchanged);
    assert_eq!(late.bytes_exchanged, late_early.bytes_exchanged);
    assert!(early.bytes_exchanged > 100 * late.bytes_exchanged);
    assert_eq!(late.per_agent_bytes.values().sum::<usize>(), late.bytes_exchanged);
}

#[test]
fn runs_are_deterministic_per_seed() {
    let world = generate_scenario(&ScenarioParams::default(), 8).unwrap();
    let cfg = CollabConfig::default();
    let t = snap_time(2.4);
    for s in StrategyId::ALL {
        let a = Simulation::new(&world, &cfg, 8).unwrap().run(s, t).unwrap();
        let b = Simulation::new(&world, &cfg, 8).unwrap().run(s, t).unwrap();
        assert_eq!(a.detections, b.detections, "{s}");
    }
}

#[test]
fn collaboration_before_the_first_full_sequence_is_rejected() {
    let world = generate_scenario(&ScenarioParams::default(), 1).unwrap();
    let cfg = CollabConfig::default();
    let sim = Simulation::new(&world, &cfg, 1).unwrap();
    assert!(sim.run(StrategyId::LateAsync, snap_time(0.2)).is_err());
}
