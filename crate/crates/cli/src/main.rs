mod commands;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tnmpcqep_core::bench::DivisionStrategy;
use tnmpcqep_core::pipeline::ThresholdRule;
use tnmpcqep_core::qep::ObservableMode;
use tnmpcqep_core::qsim::{DEFAULT_GAMMA, DEFAULT_P};
use tnmpcqep_core::tn::FrontendKind;

#[derive(Debug, Parser)]
#[command(name = "tnmpcqep", version, about = "Tensor-network encoders, metered 3-party aggregation and a simulated quantum feature processor")]
pub struct Cli {
    /// Master seed; every grid point derives its own seed from it.
    #[arg(long, global = true, env = "TNMPCQEP_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Modeled communication cost of every scenario over a grid, as CSV.
    BenchMpc(BenchArgs),
    /// Encode images with a tensor-network frontend.
    Encode(EncodeArgs),
    /// Run the quantum-enhanced processor on encoded latents and report diagnostics.
    QepRun(QepRunArgs),
    /// Demo metrics per qubit count and seed, plus a classical baseline.
    QubitSweep(QubitSweepArgs),
    /// Demo metrics per noise model and seed.
    NoiseSweep(NoiseSweepArgs),
    /// Full pipeline run with a JSON report.
    PipelineDemo(DemoArgs),
    /// Run the invariant suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrontendArg {
    Mps,
    Ttn,
    Mera,
}

impl From<FrontendArg> for FrontendKind {
    fn from(f: FrontendArg) -> Self {
        match f {
            FrontendArg::Mps => FrontendKind::Mps,
            FrontendArg::Ttn => FrontendKind::Ttn,
            FrontendArg::Mera => FrontendKind::Mera,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    ReciprocalOnce,
    PerElement,
}

impl From<StrategyArg> for DivisionStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::ReciprocalOnce => DivisionStrategy::ReciprocalOnce,
            StrategyArg::PerElement => DivisionStrategy::PerElement,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Noiseless,
    Depolarizing,
    Thermal,
    Mixed,
}

impl NoiseArg {
    pub fn name(self) -> &'static str {
        match self {
            NoiseArg::Noiseless => "noiseless",
            NoiseArg::Depolarizing => "depolarizing",
            NoiseArg::Thermal => "thermal",
            NoiseArg::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObservablesArg {
    NearestNeighbor,
    AllPairs,
}

impl From<ObservablesArg> for ObservableMode {
    fn from(o: ObservablesArg) -> Self {
        match o {
            ObservablesArg::NearestNeighbor => ObservableMode::NearestNeighbor,
            ObservablesArg::AllPairs => ObservableMode::AllPairs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThresholdArg {
    Youden,
    F1,
}

impl From<ThresholdArg> for ThresholdRule {
    fn from(t: ThresholdArg) -> Self {
        match t {
            ThresholdArg::Youden => ThresholdRule::Youden,
            ThresholdArg::F1 => ThresholdRule::F1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Group {
    Ring,
    Mpc,
    Bench,
    Tn,
    Qsim,
    Qep,
    Pipeline,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1)]
    pub n_min: usize,
    #[arg(long, default_value_t = 30)]
    pub n_max: usize,
    #[arg(long, value_delimiter = ',', default_value = "64,784")]
    pub dims: Vec<usize>,
    /// Ring bit width.
    #[arg(long, default_value_t = 64)]
    pub k: u32,
    /// Division iterations.
    #[arg(long, default_value_t = 5)]
    pub theta: u32,
    #[arg(long, default_value_t = 20)]
    pub frac_bits: u32,
    #[arg(long, value_enum, default_value_t = StrategyArg::ReciprocalOnce)]
    pub strategy: StrategyArg,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where images come from: an IDX pair or the synthetic generator.
#[derive(Debug, Args)]
pub struct SourceArgs {
    #[arg(long, requires = "labels")]
    pub images: Option<PathBuf>,
    #[arg(long, requires = "images")]
    pub labels: Option<PathBuf>,
    /// Synthetic sample count when no IDX files are given.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long, default_value_t = DEFAULT_P)]
    pub p: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long, value_enum, default_value_t = FrontendArg::Ttn)]
    pub frontend: FrontendArg,
    /// Latent width.
    #[arg(long, default_value_t = 64)]
    pub d: usize,
    /// Load frontend parameters instead of seeding them.
    #[arg(long, conflicts_with_all = ["frontend", "d"])]
    pub params: Option<PathBuf>,
    /// Save the frontend parameters used.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QepRunArgs {
    #[arg(long, value_enum, default_value_t = FrontendArg::Ttn)]
    pub frontend: FrontendArg,
    #[arg(long, default_value_t = 8)]
    pub nq: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    /// Angle scale.
    #[arg(long, default_value_t = 0.5)]
    pub scale: f64,
    #[arg(long, value_enum, default_value_t = ObservablesArg::NearestNeighbor)]
    pub observables: ObservablesArg,
    #[arg(long, value_enum, default_value_t = NoiseArg::Noiseless)]
    pub noise: NoiseArg,
    #[command(flatten)]
    pub noise_params: NoiseArgs,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QubitSweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,10,12,14,16")]
    pub nq: Vec<usize>,
    #[arg(long, value_enum, default_value_t = FrontendArg::Ttn)]
    pub frontend: FrontendArg,
    /// Number of seeds derived from the master seed.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoiseSweepArgs {
    #[arg(long, default_value_t = 8)]
    pub nq: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "noiseless,depolarizing,thermal,mixed")]
    pub noise: Vec<NoiseArg>,
    #[command(flatten)]
    pub noise_params: NoiseArgs,
    #[arg(long, value_enum, default_value_t = FrontendArg::Ttn)]
    pub frontend: FrontendArg,
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProcessorArg {
    Classical,
    Quantum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    Plain,
    Secure,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, value_enum, default_value_t = FrontendArg::Ttn)]
    pub frontend: FrontendArg,
    #[arg(long, value_enum, default_value_t = ProcessorArg::Quantum)]
    pub processor: ProcessorArg,
    #[arg(long, value_enum, default_value_t = AggregationArg::Plain)]
    pub aggregation: AggregationArg,
    #[arg(long, default_value_t = 8)]
    pub nq: usize,
    #[arg(long, value_enum, default_value_t = NoiseArg::Noiseless)]
    pub noise: NoiseArg,
    #[command(flatten)]
    pub noise_params: NoiseArgs,
    #[arg(long, default_value_t = 16)]
    pub clients: usize,
    #[arg(long, value_enum, default_value_t = ThresholdArg::Youden)]
    pub threshold_rule: ThresholdArg,
    /// Readout gradient steps.
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    /// Pin the fusion gate to zero so the processor passes latents through.
    #[arg(long)]
    pub force_alpha_zero: bool,
    #[arg(long, requires_all = ["train_labels", "test_images", "test_labels"])]
    pub train_images: Option<PathBuf>,
    #[arg(long, requires = "train_images")]
    pub train_labels: Option<PathBuf>,
    #[arg(long, requires = "train_images")]
    pub test_images: Option<PathBuf>,
    #[arg(long, requires = "train_images")]
    pub test_labels: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    pub train_samples: usize,
    #[arg(long, default_value_t = 100)]
    pub test_samples: usize,
    /// JSON report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional one-row CSV summary.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Restrict to these groups; all groups when absent.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub group: Vec<Group>,
    /// Frontend parameter file to check in the tn group.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

/// Failure split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let seed = cli.seed;
    let result = match cli.command {
        Command::BenchMpc(a) => commands::bench_mpc(&a),
        Command::Encode(a) => commands::encode(&a, seed),
        Command::QepRun(a) => commands::qep_run(&a, seed),
        Command::QubitSweep(a) => commands::qubit_sweep(&a, seed),
        Command::NoiseSweep(a) => commands::noise_sweep(&a, seed),
        Command::PipelineDemo(a) => commands::pipeline_demo(&a, seed),
        Command::Verify(a) => verify::run(&a, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
