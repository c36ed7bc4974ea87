//! `ipfnet`: infer hourly bipartite networks from marginals and an
//! aggregated network.
//!
//! Exit codes: 0 success, 2 infeasible without repair, 3 input error,
//! 1 anything else.

mod commands;
mod ingest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "ipfnet", version, about = "Dynamic network inference by iterative proportional fitting")]
pub struct Cli {
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Omit the `meta` block (version, command line, timestamp) from JSON.
    #[arg(long, global = true)]
    pub no_meta: bool,
    /// Worker threads for per-hour and per-trial work.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build hourly networks from trip CSV files.
    Ingest(IngestArgs),
    /// Max-flow feasibility check; reports a blocking set when infeasible.
    Check(NetArgs),
    /// Run IPF on a network and marginals.
    Run(RunArgs),
    /// Add edges until IPF can converge.
    Repair(RepairCmd),
    /// Fit the gravity kernel to an aggregated network.
    GravityFit(GravityFitArgs),
    /// Doubly constrained gravity model: IPF on the distance kernel.
    GravityInfer(GravityInferArgs),
    /// Estimators that drop part of the input.
    Baseline(BaselineArgs),
    /// Sample synthetic instances.
    Simulate(SimulateArgs),
    /// Compare estimates with ground truth.
    Evaluate(EvaluateArgs),
    /// Identifiability, error bound, dispersion and stationarity diagnostics.
    Diagnose(DiagnoseArgs),
    /// Monte-Carlo sweeps over sparsity or generative model.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug, Clone)]
pub struct NetArgs {
    /// Network triplet file.
    #[arg(long)]
    pub network: PathBuf,
    /// Row marginal file.
    #[arg(long)]
    pub p: PathBuf,
    /// Column marginal file.
    #[arg(long)]
    pub q: PathBuf,
    /// Relative tolerance when reconciling the totals of p and q.
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
}

#[derive(Args, Debug, Clone)]
pub struct IpfArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveArg {
    MinEdges,
    MinLambda1,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiebreakArg {
    LargestP,
    SmallestP,
}

#[derive(Args, Debug, Clone)]
pub struct RepairArgs {
    #[arg(long, value_enum, default_value = "min-lambda1")]
    pub objective: ObjectiveArg,
    #[arg(long, value_enum, default_value = "largest-p")]
    pub tiebreak: TiebreakArg,
    #[arg(long, default_value_t = 0.01)]
    pub edge_weight_multiplier: f64,
    #[arg(long)]
    pub max_rounds: Option<usize>,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Trip CSV files or directories of them.
    #[arg(long, required = true, num_args = 1..)]
    pub trips: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Keep trips assigned to hours at or after this time.
    #[arg(long)]
    pub from: Option<String>,
    /// Keep trips assigned to hours before this time.
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long, default_value = "started_at")]
    pub started_field: String,
    #[arg(long, default_value = "ended_at")]
    pub ended_field: String,
    #[arg(long, default_value = "start_station_id")]
    pub start_field: String,
    #[arg(long, default_value = "end_station_id")]
    pub end_field: String,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub ipf: IpfArgs,
    /// Repair the network first when IPF cannot converge.
    #[arg(long)]
    pub repair: bool,
    #[command(flatten)]
    pub repair_args: RepairArgs,
    /// Write the inferred network as triplets.
    #[arg(long)]
    pub out_network: Option<PathBuf>,
    /// Write the ℓ1 marginal-error trace as CSV.
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
    /// Ground-truth network; adds cosine similarity to the output.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RepairCmd {
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub repair: RepairArgs,
    #[arg(long)]
    pub out_network: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct DistanceArgs {
    /// Station CSV with lat and lng columns (as written by `ingest`); rows and
    /// columns are both stations.
    #[arg(long, conflicts_with = "distances")]
    pub stations: Option<PathBuf>,
    /// Distance matrix as a triplet file; missing entries are zero.
    #[arg(long)]
    pub distances: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GravityFitArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[command(flatten)]
    pub dist: DistanceArgs,
    #[arg(long, default_value_t = 0.001)]
    pub bin_width: f64,
}

#[derive(Args, Debug)]
pub struct GravityInferArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[command(flatten)]
    pub dist: DistanceArgs,
    #[arg(long)]
    pub p: PathBuf,
    #[arg(long)]
    pub q: PathBuf,
    #[command(flatten)]
    pub ipf: IpfArgs,
    #[arg(long)]
    pub out_network: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    /// `p_i q_j / c`, no aggregated network.
    Rank1,
    /// Distribute `p_i` along row `i` of the aggregate.
    RowShare,
    /// Distribute `q_j` along column `j` of the aggregate.
    ColShare,
    /// Aggregate rescaled to the total.
    Scale,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    /// Aggregated network; not needed for rank1.
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub p: PathBuf,
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long)]
    pub out_network: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelArg {
    Poisson,
    Exponential,
    Negbinom,
    Interaction,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sparsity: f64,
    #[arg(long, env = "IPFNET_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "poisson")]
    pub model: ModelArg,
    /// Negative binomial success probability.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub beta: f64,
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Directory for per-trial instances; only metrics are emitted without it.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Per-trial metric CSV.
    #[arg(long)]
    pub metrics_csv: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMethod {
    IpfMonth,
    IpfWeek,
    IpfDay,
    Gravity,
    NoAggregate,
    NoP,
    NoQ,
    ScaleMonth,
    ScaleWeek,
    ScaleDay,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Estimated network (single comparison).
    #[arg(long, requires = "truth")]
    pub estimate: Option<PathBuf>,
    /// Ground-truth network (single comparison).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Ingest directory: evaluate every hour of `--day` against its slice.
    #[arg(long, conflicts_with = "estimate", requires = "day")]
    pub ingest: Option<PathBuf>,
    /// Day to evaluate, `YYYY-MM-DD`.
    #[arg(long)]
    pub day: Option<String>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ipf-month,ipf-week,ipf-day,gravity,no-aggregate,no-p,no-q,scale-month,scale-week,scale-day")]
    pub methods: Vec<EvalMethod>,
    #[arg(long, default_value_t = 0.001)]
    pub bin_width: f64,
    /// Per-hour cosine CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub ipf: IpfArgs,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub net: NetArgs,
    /// Observed network `Y` for residuals and dispersion.
    #[arg(long)]
    pub observed: Option<PathBuf>,
    /// Bound on the parameter sup-norm; defaults to that of the fit.
    #[arg(long)]
    pub bound_b: Option<f64>,
    /// Ingest directory for the stationarity summary over its hours.
    #[arg(long)]
    pub ingest: Option<PathBuf>,
    #[command(flatten)]
    pub ipf: IpfArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Sparsity,
    Misspec,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub kind: ExperimentKind,
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Summary CSV, one row per sparsity level or model.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Per-trial CSV.
    #[arg(long)]
    pub trials_csv: Option<PathBuf>,
    #[command(flatten)]
    pub ipf: IpfArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = output::exit_code(&e);
            eprintln!("error: {e:#}");
            if let Some(hint) = output::hint(&e) {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(code)
        }
    }
}
