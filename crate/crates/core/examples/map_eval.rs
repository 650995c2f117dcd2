//! Distance-threshold mAP on a hand-made frame, then the ego-only and
//! any-agent scores of the NONE strategy on a simulated frame.
//!
//! cargo run --example map_eval

use modar_v2x::collab::Simulation;
use modar_v2x::collab::{run_strategy, CollabConfig, StrategyId};
use modar_v2x::eval::{mean_ap, THRESHOLDS};
use modar_v2x::geometry::{BoundingBox, Vec3};
use modar_v2x::scene::{generate_scenario, snap_time, GtMode, ScenarioParams};

fn car(x: f64, y: f64, score: f64) -> BoundingBox {
    BoundingBox::new(Vec3::new(x, y, 0.8), Vec3::new(4.5, 1.9, 1.6), 0.0, score, 0)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gts = [car(10.0, 0.0, 1.0), car(20.0, 3.0, 1.0), car(-15.0, -3.0, 1.0)];
    let dets = [car(10.3, 0.1, 0.9), car(21.5, 3.0, 0.8), car(0.0, 30.0, 0.7)];
    let r = mean_ap(&dets, &gts, GtMode::AnyAgent);
    for (thr, ap) in THRESHOLDS.iter().zip(r.per_threshold_ap) {
        println!("AP@{thr} m = {:.2}", 100.0 * ap);
    }
    println!(
        "mAP {:.2} (tp {}, fp {}, fn {})",
        100.0 * r.map_score,
        r.tp,
        r.fp,
        r.fn_
    );

    let world = generate_scenario(&ScenarioParams::default(), 1)?;
    let config = CollabConfig::default();
    let t = snap_time(2.0);
    let out = run_strategy(StrategyId::None, &world, t, &config, 1)?;
    let sim = Simulation::new(&world, &config, 1)?;
    for mode in [GtMode::EgoOnly, GtMode::AnyAgent] {
        let gts = sim.ground_truth(t, mode)?;
        let r = mean_ap(&out.detections, &gts, mode);
        println!(
            "NONE vs {} ground truth ({} boxes): mAP {:.2}",
            mode.as_str(),
            gts.len(),
            100.0 * r.map_score
        );
    }
    Ok(())
}
