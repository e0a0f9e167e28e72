//! rewire-forge: search for resilient degree-preserving rewirings of a graph.
//!
//! Every subcommand reads plain edge-list files, writes its results under
//! `--out`, and drops a `manifest.json` there recording the command, the full
//! configuration, the seed, the tool version, sha256 hashes of all input
//! files, and the wall time. Reruns with the same inputs and seed reproduce
//! the outputs byte for byte.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric or training
//! failure. `REWIRE_FORGE_THREADS` caps the worker pool.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rewire_core::attack::AttackStrategy;
use rewire_core::metrics::{ObjectiveConfig, ResilienceKind, UtilityKind};
use rewire_core::CoreError;
use rewire_nn::NnError;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "rewire-forge",
    version,
    about = "Resilient-topology search over degree-preserving edge rewirings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate Barabasi-Albert graphs and write them as edge lists.
    Generate(GenerateArgs),
    /// Score a graph: resilience, utility, spectra, and the combined objective.
    Metrics(MetricsArgs),
    /// Simulate a targeted attack and write the s(q) curve as CSV.
    AttackCurve(AttackCurveArgs),
    /// Apply one explicit rewiring and write the resulting edge list.
    Rewire(RewireArgs),
    /// Run an optimizer (hc, sa, greedy, ea, or a trained policy).
    Optimize(OptimizeArgs),
    /// Train the edge-rewiring policy with dual-clip PPO.
    Train(TrainArgs),
    /// Dump node, edge, and graph embeddings as JSON.
    Embed(EmbedArgs),
    /// Train once per filtration order K and tabulate gain versus K.
    SweepK(SweepKArgs),
}

/// Flags shared by every scoring command. `alpha` weights resilience against
/// utility as `alpha*R + (1-alpha)*U`; a zero-weighted side is never computed.
#[derive(Args, Clone, Serialize)]
pub struct ObjectiveFlags {
    /// Resilience weight in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Resilience metric: R, sr, or ac.
    #[arg(long, default_value = "R")]
    pub resilience: ResilienceKind,
    /// Utility metric: global, local, or none.
    #[arg(long, default_value = "global")]
    pub utility: UtilityKind,
    /// Attack strategy inside the R metric: degree or betweenness.
    #[arg(long, default_value = "degree")]
    pub attack: AttackStrategy,
    /// Recompute attack centralities every this many removals (1 = adaptive).
    #[arg(long, default_value_t = 1)]
    pub attack_recompute_every: usize,
}

impl ObjectiveFlags {
    pub fn to_config(&self) -> Result<ObjectiveConfig, CliError> {
        let cfg = ObjectiveConfig {
            alpha: self.alpha,
            resilience_kind: self.resilience,
            utility_kind: self.utility,
            attack: self.attack,
            attack_recompute_every: self.attack_recompute_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Serialize)]
pub struct GenerateArgs {
    /// Number of nodes.
    #[arg(long)]
    pub n: usize,
    /// Edges attached per arriving node.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// How many graphs to write (seeded seed, seed+1, ...).
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct MetricsArgs {
    /// Input edge-list file.
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub objective: ObjectiveFlags,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct AttackCurveArgs {
    /// Input edge-list file.
    #[arg(long)]
    pub graph: PathBuf,
    /// Attack strategy: degree or betweenness.
    #[arg(long, default_value = "degree")]
    pub attack: AttackStrategy,
    /// Recompute centralities every this many removals (1 = adaptive).
    #[arg(long, default_value_t = 1)]
    pub recompute_every: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct RewireArgs {
    /// Input edge-list file.
    #[arg(long)]
    pub graph: PathBuf,
    /// First removed edge as "tail,head"; its endpoints pair with e2's.
    #[arg(long)]
    pub e1: String,
    /// Second removed edge as "tail,head".
    #[arg(long)]
    pub e2: String,
    /// Reject the action if it would disconnect the graph.
    #[arg(long)]
    pub forbid_disconnecting: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct OptimizeArgs {
    /// Input edge-list file.
    #[arg(long)]
    pub graph: PathBuf,
    /// Optimizer: hc, sa, greedy, ea, or policy.
    #[arg(long)]
    pub algo: Algo,
    #[command(flatten)]
    #[serde(flatten)]
    pub objective: ObjectiveFlags,
    /// Maximum number of rewirings.
    #[arg(long, default_value_t = 20)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Score disconnecting candidates as unacceptable.
    #[arg(long)]
    pub forbid_disconnecting: bool,
    /// SA starting temperature (default 0.01 * |initial objective|).
    #[arg(long)]
    pub sa_t0: Option<f64>,
    /// SA temperature decay per trial, in (0, 1).
    #[arg(long)]
    pub sa_decay: Option<f64>,
    /// EA population size.
    #[arg(long, default_value_t = 16)]
    pub pop_size: usize,
    /// EA generation cap (early stop still applies).
    #[arg(long, default_value_t = 1000)]
    pub generations: usize,
    /// Checkpoint stem for --algo policy (reads stem.json + stem.bin).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Filtration order used by --algo policy.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    /// Training edge-list file; repeat the flag to train on several graphs.
    #[arg(long, required = true)]
    pub graph: Vec<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub objective: ObjectiveFlags,
    /// Rewiring budget per episode.
    #[arg(long, default_value_t = 20)]
    pub budget: usize,
    /// Filtration order for both encoders.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Total environment steps to collect.
    #[arg(long, default_value_t = 20000)]
    pub steps: usize,
    /// Transitions per PPO update.
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    /// Parallel rollout streams.
    #[arg(long, default_value_t = 8)]
    pub num_envs: usize,
    /// Optimization epochs per update.
    #[arg(long, default_value_t = 3)]
    pub epochs: usize,
    /// Greedy-evaluation cadence in updates.
    #[arg(long, default_value_t = 5)]
    pub eval_every: usize,
    /// Forbid disconnecting rewirings during rollouts.
    #[arg(long)]
    pub forbid_disconnecting: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct EmbedArgs {
    /// Input edge-list file.
    #[arg(long)]
    pub graph: PathBuf,
    /// Filtration order.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Seed for the randomly initialized encoder (ignored with --checkpoint).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint stem holding trained parameters.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct SweepKArgs {
    /// Input edge-list file.
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub objective: ObjectiveFlags,
    /// Rewiring budget per episode.
    #[arg(long, default_value_t = 20)]
    pub budget: usize,
    /// Largest filtration order to try (sweeps K = 0..=k_max).
    #[arg(long, default_value_t = 8)]
    pub k_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Environment steps per training run.
    #[arg(long, default_value_t = 20000)]
    pub steps: usize,
    /// Transitions per PPO update.
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    /// Parallel rollout streams.
    #[arg(long, default_value_t = 8)]
    pub num_envs: usize,
    /// Optimization epochs per update.
    #[arg(long, default_value_t = 3)]
    pub epochs: usize,
    /// Greedy-evaluation cadence in updates.
    #[arg(long, default_value_t = 5)]
    pub eval_every: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Hc,
    Sa,
    Greedy,
    Ea,
    Policy,
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hc" => Ok(Self::Hc),
            "sa" => Ok(Self::Sa),
            "greedy" => Ok(Self::Greedy),
            "ea" => Ok(Self::Ea),
            "policy" => Ok(Self::Policy),
            other => Err(format!("unknown algorithm {other:?} (expected hc|sa|greedy|ea|policy)")),
        }
    }
}

/// CLI failures carry the exit code they map to: 1 usage, 2 data, 3 numeric.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Data(m) | Self::Numeric(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parameter(_) => Self::Usage(e.to_string()),
            CoreError::Numeric(_) => Self::Numeric(e.to_string()),
            CoreError::Sampling(_) | CoreError::Parse { .. } | CoreError::Infeasible(_) | CoreError::Io(_) => {
                Self::Data(e.to_string())
            }
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Core(c) => c.into(),
            NnError::Shape { .. } | NnError::Training(_) => Self::Numeric(e.to_string()),
            NnError::Contract(_) | NnError::Checkpoint(_) | NnError::Io(_) | NnError::Json(_) => {
                Self::Data(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return ExitCode::from(if informational { 0 } else { 1 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
