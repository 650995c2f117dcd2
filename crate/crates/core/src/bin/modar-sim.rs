use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use modar_v2x::acceptance::{run_criterion, CRITERIA};
use modar_v2x::collab::{Estimator, Simulation, StrategyId};
use modar_v2x::experiment::{
    build_world, evaluation_times, run_experiment, spot_check, write_artifacts, ExperimentConfig, Overrides,
};
use modar_v2x::scene::snap_time;
use modar_v2x::v2x::{encode_detection, encode_early, hex_dump};
use modar_v2x::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "modar-sim",
    version,
    about = "Multi-agent V2X collaborative perception simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write results.csv and summary.json.
    Simulate(RunArgs),
    /// Hex-dump an encoded message from the configured scenario.
    ProtocolDump {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "detection")]
        kind: MessageKind,
        /// Dump at most this many bytes; 0 dumps everything.
        #[arg(long, default_value_t = 512)]
        limit: usize,
    },
    /// Run the acceptance suite, or the listed criteria.
    Verify { criteria: Vec<u8> },
}

#[derive(Clone, Copy, ValueEnum)]
enum MessageKind {
    Detection,
    Early,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strategy: Option<StrategyId>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    estimator: Option<Estimator>,
    /// Async lag, seconds.
    #[arg(long)]
    lag: Option<f64>,
    /// Participating agents, ego included.
    #[arg(long)]
    agents: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    parallel: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            strategy: self.strategy,
            output_dir: self.out.clone(),
            estimator: self.estimator,
            lag: self.lag,
            agents: self.agents,
            parallel: self.parallel,
        })?;
        Ok(cfg)
    }
}

fn simulate(cfg: &ExperimentConfig) -> Result<(), Error> {
    let outcome = run_experiment(cfg)?;
    let checked = spot_check(&outcome, 5, cfg.seeds[0])?;
    write_artifacts(&outcome, cfg, &cfg.output_dir)?;
    println!(
        "{:<16} {:<10} {:>8} {:>8} {:>12}",
        "strategy", "gt_mode", "mAP", "std", "bytes/frame"
    );
    for row in &outcome.summary {
        println!(
            "{:<16} {:<10} {:>8.2} {:>8.2} {:>12.0}",
            row.strategy,
            row.gt_mode.as_str(),
            100.0 * row.map_mean,
            100.0 * row.map_std,
            row.bytes_mean
        );
    }
    println!(
        "{} runs, {} rows spot-checked, artifacts in {}",
        outcome.records.len(),
        checked.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn protocol_dump(cfg: &ExperimentConfig, kind: MessageKind, limit: usize) -> Result<(), Error> {
    let seed = cfg.seeds[0];
    let world = build_world(cfg, seed)?;
    let sim = Simulation::new(&world, &cfg.collab, seed)?;
    let participants = sim.participants();
    let sender = participants.get(1).unwrap_or(&participants[0]).agent_id;
    let t = evaluation_times(cfg)
        .first()
        .copied()
        .ok_or_else(|| Error::Config("no evaluation frames".into()))?;
    let t_i = snap_time((t - cfg.collab.async_lag).max(sim.earliest_time()));
    let frame = sim.agent_frame(sender, t_i)?;
    let bytes = match kind {
        MessageKind::Detection => encode_detection(&sim.detection_message(&frame)?)?,
        MessageKind::Early => encode_early(&sim.early_message(&frame))?,
    };
    let shown = if limit == 0 {
        bytes.len()
    } else {
        limit.min(bytes.len())
    };
    println!("agent {sender} t_i {t_i:.3} s, {} bytes, showing {shown}", bytes.len());
    print!("{}", hex_dump(&bytes[..shown]));
    Ok(())
}

fn verify(ids: &[u8]) -> bool {
    let mut passed = true;
    for (id, _) in CRITERIA.iter().filter(|(id, _)| ids.is_empty() || ids.contains(id)) {
        let report = run_criterion(*id);
        println!("{report}");
        passed &= report.passed;
    }
    passed
}

fn exit_code(e: &Error) -> ExitCode {
    ExitCode::from(match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    })
}

fn with_config(run: &RunArgs, action: impl FnOnce(&ExperimentConfig) -> Result<(), Error>) -> ExitCode {
    let cfg = match run.load() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("modar-sim: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match action(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("modar-sim: {e}");
            exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    match &Cli::parse().command {
        Command::Simulate(run) => with_config(run, simulate),
        Command::ProtocolDump { run, kind, limit } => with_config(run, |cfg| protocol_dump(cfg, *kind, *limit)),
        Command::Verify { criteria } => {
            if verify(criteria) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}
