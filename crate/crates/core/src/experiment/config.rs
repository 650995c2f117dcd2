use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::collab::{CollabConfig, Estimator, StrategyId};
use crate::error::{Error, Result};
use crate::geometry::AgentId;
use crate::scene::{GtMode, ScenarioParams, World};

/// Per-agent overrides applied on top of the generated roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    pub agent_id: AgentId,
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub detection_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Agents,
    Heterogeneity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub strategies: Vec<StrategyId>,
    pub gt_modes: Vec<GtMode>,
    pub output_dir: PathBuf,
    /// Worker threads for seed-level parallelism; 0 picks the core count.
    pub parallel: usize,
    /// Extra sweeps written next to the main results.
    pub sweeps: Vec<SweepKind>,
    /// Strategy evaluated by the sweeps.
    pub sweep_strategy: StrategyId,
    /// Ground-truth filter used by the sweeps.
    pub sweep_gt_mode: GtMode,
    pub scenario: ScenarioParams,
    pub collab: CollabConfig,
    pub roster: Vec<RosterEntry>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3],
            strategies: StrategyId::ALL.to_vec(),
            gt_modes: vec![GtMode::AnyAgent, GtMode::EgoOnly],
            output_dir: PathBuf::from("out"),
            parallel: 0,
            sweeps: Vec::new(),
            sweep_strategy: StrategyId::LateEarly,
            sweep_gt_mode: GtMode::AnyAgent,
            scenario: ScenarioParams::default(),
            collab: CollabConfig::default(),
            roster: Vec::new(),
        }
    }
}

/// Command-line overrides; `None` keeps the config value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub strategy: Option<StrategyId>,
    pub output_dir: Option<PathBuf>,
    pub estimator: Option<Estimator>,
    pub lag: Option<f64>,
    pub agents: Option<usize>,
    pub parallel: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seeds = vec![seed];
        }
        if let Some(s) = o.strategy {
            self.strategies = vec![s];
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(e) = o.estimator {
            self.collab.estimator = e;
        }
        if let Some(lag) = o.lag {
            self.collab.async_lag = lag;
        }
        if let Some(n) = o.agents {
            self.collab.agent_count = Some(n);
        }
        if let Some(p) = o.parallel {
            self.parallel = p;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let config_err = |e: Error| match e {
            Error::Contract(msg) => Error::Config(msg),
            other => other,
        };
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: at least one seed required".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("strategies: at least one strategy required".into()));
        }
        if self.gt_modes.is_empty() {
            return Err(Error::Config("gt_modes: at least one mode required".into()));
        }
        self.scenario.validate().map_err(config_err)?;
        self.collab.validate().map_err(config_err)?;
        if let Some(n) = self.collab.agent_count {
            if n > self.scenario.agent_count {
                return Err(Error::Config(format!(
                    "collab.agent_count = {n} exceeds scenario.agent_count = {}",
                    self.scenario.agent_count
                )));
            }
        }
        for r in &self.roster {
            if let Some(p) = &r.profile {
                self.collab.profile(p).map_err(config_err)?;
            }
            if r.detection_rate.is_some_and(|d| !(d > 0.0)) {
                return Err(Error::Config(format!(
                    "roster agent {}: detection_rate must be positive",
                    r.agent_id
                )));
            }
        }
        if self.evaluation_frame_count() == 0 {
            return Err(Error::Config(
                "scenario.frames too small for the sequence length and async lag".into(),
            ));
        }
        Ok(())
    }

    /// Index of the first frame every strategy can be evaluated at.
    pub fn first_evaluation_frame(&self) -> usize {
        let lag_frames = (self.collab.async_lag * self.scenario.frame_rate - 1e-9)
            .ceil()
            .max(0.0) as usize;
        self.collab.sequence_length - 1 + lag_frames
    }

    pub fn evaluation_frame_count(&self) -> usize {
        self.scenario.frames.saturating_sub(self.first_evaluation_frame())
    }

    /// Applies roster overrides to a generated world.
    pub fn apply_roster(&self, world: &mut World) -> Result<()> {
        for r in &self.roster {
            let agent = world
                .agents
                .iter_mut()
                .find(|a| a.agent_id == r.agent_id)
                .ok_or_else(|| Error::Config(format!("roster: no agent with id {}", r.agent_id)))?;
            if let Some(p) = &r.profile {
                agent.profile = p.clone();
            }
            if let Some(d) = r.detection_rate {
                agent.detection_rate = d;
            }
        }
        Ok(())
    }
}
