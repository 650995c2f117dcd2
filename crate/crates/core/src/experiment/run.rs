use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, SweepKind};
use super::sweep::{sweep_agents, sweep_heterogeneity, AgentSweepRow, HeterogeneityRow};
use crate::collab::{Simulation, StrategyId};
use crate::error::{Error, Result};
use crate::eval::{aggregate_runs, mean_ap_frames, FrameBoxes, RunRecord, SummaryRow};
use crate::geometry::BoundingBox;
use crate::rng::{self, Module};
use crate::scene::{generate_scenario, snap_time, GtMode, World};

pub const CSV_HEADER: &str =
    "strategy,seed,gt_mode,agents,frames,map_score,ap_0.5,ap_1.0,ap_2.0,ap_4.0,tp,fp,fn,bytes_mean";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawFrame {
    pub t: f64,
    pub detections: Vec<BoundingBox>,
    pub ground_truth: Vec<BoundingBox>,
}

/// Everything needed to recompute one results row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawRun {
    pub strategy: StrategyId,
    pub seed: u64,
    pub gt_mode: GtMode,
    pub bytes_per_frame: f64,
    pub frames: Vec<RawFrame>,
}

impl RawRun {
    pub fn evaluate(&self) -> crate::eval::EvalResult {
        let views: Vec<FrameBoxes> = self
            .frames
            .iter()
            .map(|f| FrameBoxes {
                dets: &f.detections,
                gts: &f.ground_truth,
            })
            .collect();
        mean_ap_frames(&views, self.gt_mode, self.bytes_per_frame)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    /// One record per (strategy, seed, gt mode), in that order.
    pub records: Vec<RunRecord>,
    /// Raw boxes behind `records`, index-aligned.
    pub raw: Vec<RawRun>,
    pub summary: Vec<SummaryRow>,
    pub agents: usize,
    pub agent_sweep: Option<Vec<AgentSweepRow>>,
    pub heterogeneity_sweep: Option<Vec<HeterogeneityRow>>,
}

/// Query times evaluated in every run.
pub fn evaluation_times(cfg: &ExperimentConfig) -> Vec<f64> {
    (cfg.first_evaluation_frame()..cfg.scenario.frames)
        .map(|k| snap_time(k as f64 / cfg.scenario.frame_rate))
        .collect()
}

/// Generates the scenario for `seed` and applies the roster.
pub fn build_world(cfg: &ExperimentConfig, seed: u64) -> Result<World> {
    let mut world = generate_scenario(&cfg.scenario, seed)?;
    cfg.apply_roster(&mut world)?;
    world.validate()?;
    Ok(world)
}

/// Simulates and scores every configured (strategy, gt mode) pair for one
/// seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<RawRun>> {
    let world = build_world(cfg, seed)?;
    run_world(cfg, &world, &cfg.strategies, seed)
}

pub(crate) fn run_world(
    cfg: &ExperimentConfig,
    world: &World,
    strategies: &[StrategyId],
    seed: u64,
) -> Result<Vec<RawRun>> {
    let sim = Simulation::new(world, &cfg.collab, seed)?;
    let times = evaluation_times(cfg);
    let truth: Vec<Vec<Vec<BoundingBox>>> = cfg
        .gt_modes
        .iter()
        .map(|m| {
            times
                .iter()
                .map(|t| sim.ground_truth(*t, *m))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for &strategy in strategies {
        let outputs = times
            .iter()
            .map(|t| sim.run(strategy, *t))
            .collect::<Result<Vec<_>>>()?;
        let bytes_per_frame = outputs.iter().map(|o| o.bytes_exchanged as f64).sum::<f64>() / outputs.len() as f64;
        for (mode, gts) in cfg.gt_modes.iter().zip(&truth) {
            let frames = times
                .iter()
                .zip(&outputs)
                .zip(gts)
                .map(|((t, o), g)| RawFrame {
                    t: *t,
                    detections: o.detections.clone(),
                    ground_truth: g.clone(),
                })
                .collect();
            out.push(RawRun {
                strategy,
                seed,
                gt_mode: *mode,
                bytes_per_frame,
                frames,
            });
        }
    }
    Ok(out)
}

pub(crate) fn with_pool<T: Send>(parallel: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs `f` over seeds in parallel, results in seed order.
pub(crate) fn map_seeds<T: Send>(cfg: &ExperimentConfig, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    with_pool(cfg.parallel, || {
        cfg.seeds.par_iter().map(|s| f(*s)).collect::<Result<Vec<_>>>()
    })?
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let per_seed = map_seeds(cfg, |seed| run_seed(cfg, seed))?;
    let mut raw: Vec<RawRun> = per_seed.into_iter().flatten().collect();
    let strategy_rank = |s: StrategyId| cfg.strategies.iter().position(|x| *x == s).unwrap_or(usize::MAX);
    let seed_rank = |s: u64| cfg.seeds.iter().position(|x| *x == s).unwrap_or(usize::MAX);
    raw.sort_by_key(|r| (strategy_rank(r.strategy), seed_rank(r.seed)));
    let records: Vec<RunRecord> = raw
        .iter()
        .map(|r| RunRecord {
            strategy: r.strategy.to_string(),
            seed: r.seed,
            result: r.evaluate(),
        })
        .collect();
    let summary = aggregate_runs(&records);
    let agent_sweep = if cfg.sweeps.contains(&SweepKind::Agents) {
        Some(sweep_agents(cfg, 1..=cfg.scenario.agent_count)?)
    } else {
        None
    };
    let heterogeneity_sweep = if cfg.sweeps.contains(&SweepKind::Heterogeneity) {
        Some(sweep_heterogeneity(cfg)?)
    } else {
        None
    };
    Ok(ExperimentOutcome {
        records,
        raw,
        summary,
        agents: cfg.collab.agent_count.unwrap_or(cfg.scenario.agent_count),
        agent_sweep,
        heterogeneity_sweep,
    })
}

/// Recomputes `count` randomly chosen rows from their raw boxes and checks
/// they reproduce the stored scores exactly. Returns the checked indices.
pub fn spot_check(outcome: &ExperimentOutcome, count: usize, seed: u64) -> Result<Vec<usize>> {
    let n = outcome.records.len();
    let mut rng = rng::stream(seed, Module::Test, 0, 0, 0);
    let picked = sample(&mut rng, n, count.min(n)).into_vec();
    for &i in &picked {
        let again = outcome.raw[i].evaluate();
        if again != outcome.records[i].result {
            return Err(Error::contract(format!(
                "row {i} ({} seed {}) does not reproduce: stored {} vs recomputed {}",
                outcome.records[i].strategy,
                outcome.records[i].seed,
                outcome.records[i].result.map_score,
                again.map_score
            )));
        }
    }
    Ok(picked)
}

fn pct(x: f64) -> String {
    format!("{:.6}", 100.0 * x)
}

pub fn results_csv(outcome: &ExperimentOutcome, frames: usize) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &outcome.records {
        let e = &r.result;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6}",
            r.strategy,
            r.seed,
            e.gt_mode.as_str(),
            outcome.agents,
            frames,
            pct(e.map_score),
            pct(e.per_threshold_ap[0]),
            pct(e.per_threshold_ap[1]),
            pct(e.per_threshold_ap[2]),
            pct(e.per_threshold_ap[3]),
            e.tp,
            e.fp,
            e.fn_,
            e.bytes_per_frame
        );
    }
    s
}

#[derive(Serialize)]
struct SummaryRowOut<'a> {
    strategy: &'a str,
    gt_mode: &'a str,
    runs: usize,
    map_mean: f64,
    map_std: f64,
    ap_mean: [f64; 4],
    bytes_mean: f64,
}

#[derive(Serialize)]
struct SummaryOut<'a> {
    agents: usize,
    frames_per_run: usize,
    rows: Vec<SummaryRowOut<'a>>,
    agent_sweep: &'a Option<Vec<AgentSweepRow>>,
    heterogeneity_sweep: &'a Option<Vec<HeterogeneityRow>>,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn summary_json(outcome: &ExperimentOutcome, frames: usize) -> String {
    let rows = outcome
        .summary
        .iter()
        .map(|r| SummaryRowOut {
            strategy: &r.strategy,
            gt_mode: r.gt_mode.as_str(),
            runs: r.runs,
            map_mean: round6(100.0 * r.map_mean),
            map_std: round6(100.0 * r.map_std),
            ap_mean: r.ap_mean.map(|a| round6(100.0 * a)),
            bytes_mean: round6(r.bytes_mean),
        })
        .collect();
    let out = SummaryOut {
        agents: outcome.agents,
        frames_per_run: frames,
        rows,
        agent_sweep: &outcome.agent_sweep,
        heterogeneity_sweep: &outcome.heterogeneity_sweep,
    };
    serde_json::to_string_pretty(&out).expect("summary is serializable")
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `results.csv`, `summary.json`, `detections.json` and any sweep
/// CSVs into `dir`.
pub fn write_artifacts(outcome: &ExperimentOutcome, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let frames = cfg.evaluation_frame_count();
    write(dir, "results.csv", &results_csv(outcome, frames))?;
    write(dir, "summary.json", &summary_json(outcome, frames))?;
    let raw = serde_json::to_string(&outcome.raw).expect("raw runs are serializable");
    write(dir, "detections.json", &raw)?;
    if let Some(rows) = &outcome.agent_sweep {
        let mut s = String::from("agents,runs,map_mean,map_std,map_sem\n");
        for r in rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.agents,
                r.runs,
                pct(r.map_mean),
                pct(r.map_std),
                pct(r.map_sem)
            );
        }
        write(dir, "sweep_agents.csv", &s)?;
    }
    if let Some(rows) = &outcome.heterogeneity_sweep {
        let mut s = String::from("profile_s_agents,runs,map_mean,map_std,late_async_prop_mean\n");
        for r in rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.profile_s_agents,
                r.runs,
                pct(r.map_mean),
                pct(r.map_std),
                pct(r.late_async_prop_mean)
            );
        }
        write(dir, "sweep_heterogeneity.csv", &s)?;
    }
    Ok(())
}
