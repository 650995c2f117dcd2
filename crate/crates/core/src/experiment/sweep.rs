use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{build_world, map_seeds, run_world};
use crate::collab::StrategyId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSweepRow {
    /// Participating agents, ego included.
    pub agents: usize,
    pub runs: usize,
    pub map_mean: f64,
    pub map_std: f64,
    /// Standard error of the mean over seeds.
    pub map_sem: f64,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeterogeneityRow {
    pub profile_s_agents: usize,
    pub runs: usize,
    pub map_mean: f64,
    pub map_std: f64,
    /// LATE_ASYNC_PROP on the same mix, the late-collaboration lower bound.
    pub late_async_prop_mean: f64,
}

fn stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

fn sweep_score(
    cfg: &ExperimentConfig,
    strategies: &[StrategyId],
    prepare: impl Fn(&mut crate::scene::World) + Sync,
) -> Result<Vec<Vec<f64>>> {
    let mut single = cfg.clone();
    single.gt_modes = vec![cfg.sweep_gt_mode];
    map_seeds(cfg, |seed| {
        let mut world = build_world(&single, seed)?;
        prepare(&mut world);
        let runs = run_world(&single, &world, strategies, seed)?;
        Ok(runs.iter().map(|r| r.evaluate().map_score).collect())
    })
}

/// mAP of the sweep strategy as the number of participating agents grows,
/// adding agents in roster order (ego, IRSU, then the other vehicles).
pub fn sweep_agents(cfg: &ExperimentConfig, counts: impl IntoIterator<Item = usize>) -> Result<Vec<AgentSweepRow>> {
    counts
        .into_iter()
        .map(|n| {
            if n == 0 || n > cfg.scenario.agent_count {
                return Err(Error::Config(format!(
                    "agent count {n} outside 1..={}",
                    cfg.scenario.agent_count
                )));
            }
            let mut c = cfg.clone();
            c.collab.agent_count = Some(n);
            let scores: Vec<f64> = sweep_score(&c, &[cfg.sweep_strategy], |_| {})?
                .into_iter()
                .map(|v| v[0])
                .collect();
            let (map_mean, map_std) = stats(&scores);
            Ok(AgentSweepRow {
                agents: n,
                runs: scores.len(),
                map_mean,
                map_std,
                map_sem: map_std / (scores.len() as f64).sqrt(),
                per_seed: scores,
            })
        })
        .collect()
}

/// Replaces profile-P with profile-S one participating agent at a time, in
/// roster order, from none to all of them.
pub fn sweep_heterogeneity(cfg: &ExperimentConfig) -> Result<Vec<HeterogeneityRow>> {
    const WEAK: &str = "profile-S";
    cfg.collab
        .profile(WEAK)
        .map_err(|_| Error::Config(format!("heterogeneity sweep needs a '{WEAK}' detector profile")))?;
    let n = cfg.collab.agent_count.unwrap_or(cfg.scenario.agent_count);
    (0..=n)
        .map(|mix| {
            let scores = sweep_score(cfg, &[cfg.sweep_strategy, StrategyId::LateAsyncProp], |world| {
                let ego = world.ego().agent_id;
                let mut order: Vec<usize> = (0..world.agents.len()).collect();
                order.sort_by_key(|i| world.agents[*i].agent_id != ego);
                for i in order.into_iter().take(mix) {
                    world.agents[i].profile = WEAK.into();
                }
            })?;
            let main: Vec<f64> = scores.iter().map(|v| v[0]).collect();
            let floor: Vec<f64> = scores.iter().map(|v| v[1]).collect();
            let (map_mean, map_std) = stats(&main);
            Ok(HeterogeneityRow {
                profile_s_agents: mix,
                runs: main.len(),
                map_mean,
                map_std,
                late_async_prop_mean: stats(&floor).0,
            })
        })
        .collect()
}
