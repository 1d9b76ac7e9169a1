use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trimreg::experiments::{ConvergencePlan, ExperimentPlan, GgmPlan, InitPlan};
use trimreg::BcdConfig;

#[derive(Debug, Parser)]
#[command(
    name = "trimreg",
    version,
    about = "Trimmed l1 regularized estimation: solvers, data generators and replicated experiments",
    after_help = solver_defaults_help()
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Base seed. Overrides the seed of a config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for replicate-level parallelism (0 = one per core).
    /// Outputs do not depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Output directory.
    #[arg(long, global = true, env = "TRIMREG_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,

    /// Write per-iteration solver traces (`solve`). The convergence
    /// experiment always writes its traces.
    #[arg(long, global = true)]
    pub trace: bool,

    /// JSON config with the fields of the experiment plan, or a run manifest
    /// (its `resolved_config` is used). Flags override config values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem on a dataset file and print the estimate.
    Solve(SolveArgs),
    /// Generate a synthetic dataset (design CSV and ground truth CSV).
    Gen(GenArgs),
    /// Run a replicated experiment.
    #[command(subcommand)]
    Exp(ExpCommand),
    /// Diagnostics.
    #[command(subcommand)]
    Diag(DiagCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    /// Least squares on a design with a trailing `y` column.
    Ls,
    /// Gaussian graphical model on the sample covariance of the rows.
    Ggm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Trimmed,
    Lasso,
    Scad,
    Mcp,
    /// Proximal DC scheme for the trimmed penalty.
    Dc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WUpdateArg {
    GradientStep,
    ExactMinimize,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Dataset CSV (header row; `x*` columns, then `y` for least squares).
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long, value_enum, default_value_t = LossKind::Ls)]
    pub loss: LossKind,

    #[arg(long)]
    pub lambda: f64,

    /// Trim count: coefficients for `ls`, symmetric off-diagonal pairs for
    /// `ggm`.
    #[arg(long, default_value_t = 0)]
    pub h: usize,

    #[arg(long, value_enum, default_value_t = MethodArg::Trimmed)]
    pub method: MethodArg,

    /// Weight step size (default 1/lambda).
    #[arg(long)]
    pub tau: Option<f64>,

    #[arg(long, value_enum, default_value_t = WUpdateArg::GradientStep)]
    pub w_update: WUpdateArg,

    #[arg(long, default_value_t = BcdConfig::default().max_iters)]
    pub max_iters: usize,

    /// Stop when the stationarity measure T falls to this value.
    #[arg(long, default_value_t = BcdConfig::default().tol_stationarity)]
    pub tol_stationarity: f64,

    /// Relative objective change counted as a plateau step.
    #[arg(long, default_value_t = BcdConfig::default().tol_objective)]
    pub tol_objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    M2,
    M1,
    Diamond,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value_t = DesignArg::M2)]
    pub design: DesignArg,

    #[arg(long, default_value_t = 100)]
    pub n: usize,

    #[arg(long, default_value_t = 64)]
    pub p: usize,

    #[arg(long, default_value_t = 4)]
    pub k: usize,

    /// Covariance parameter (default 0.7 for M2, 0.3 for M1).
    #[arg(long)]
    pub correlation: Option<f64>,

    /// Edge strength of the diamond graph.
    #[arg(long, default_value_t = 0.3)]
    pub rho: f64,

    /// Standard deviation of the nonzero coefficients.
    #[arg(long, default_value_t = trimreg::datagen::BETA_SD)]
    pub beta_sd: f64,

    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
}

#[derive(Debug, Subcommand)]
pub enum ExpCommand {
    /// Support-recovery probability curves.
    #[command(after_help = plan_help(&ExperimentPlan::default().resolved()))]
    SupportRecovery(SupportArgs),
    /// l2 / l-infinity error curves and error slopes.
    #[command(after_help = plan_help(&ExperimentPlan::error_curves().resolved()))]
    ErrorCurves(ErrorArgs),
    /// Block descent versus the DC scheme from the same start.
    #[command(after_help = plan_help(&ConvergencePlan::default()))]
    Convergence(ConvergenceArgs),
    /// Diamond-graph support recovery for the graphical model.
    #[command(after_help = plan_help(&GgmPlan::default()))]
    GgmDiamond(GgmArgs),
    /// Spread of the end points over random initializations.
    #[command(after_help = plan_help(&InitPlan::default().resolved()))]
    InitStudy(InitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// log10 lambda in {-3.0, ..., -1.0}, beta ~ N(0, 0.8^2), h = ceil(0.05 p).
    SmallRegime,
}

#[derive(Debug, Args)]
pub struct SupportArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,

    /// Add the (p, k) = (512, 32) dimension.
    #[arg(long)]
    pub large: bool,

    #[arg(long, value_enum)]
    pub design: Option<DesignArg>,

    #[arg(long)]
    pub correlation: Option<f64>,

    #[arg(long)]
    pub replicates: Option<usize>,

    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ErrorArgs {
    #[arg(long)]
    pub replicates: Option<usize>,

    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,

    /// Comma-separated trim counts.
    #[arg(long, value_delimiter = ',')]
    pub h_sweep: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    /// Comma-separated regularization values.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct GgmArgs {
    #[arg(long)]
    pub replicates: Option<usize>,

    /// Comma-separated edge strengths.
    #[arg(long, value_delimiter = ',')]
    pub rhos: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long)]
    pub num_inits: Option<usize>,

    /// Fixed lambda instead of cross-validation.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum DiagCommand {
    /// Incoherence-type quantities over sampled trim sets.
    Incoherence(IncoherenceArgs),
}

#[derive(Debug, Args)]
pub struct IncoherenceArgs {
    /// Design CSV; uses its sample Gram matrix. Needs `--truth`.
    #[arg(long, requires = "truth")]
    pub data: Option<PathBuf>,

    /// Ground-truth CSV from `gen` (its `in_support` column).
    #[arg(long)]
    pub truth: Option<PathBuf>,

    /// Without `--data`: population covariance of this design.
    #[arg(long, value_enum, default_value_t = DesignArg::M1)]
    pub design: DesignArg,

    #[arg(long, default_value_t = 64)]
    pub p: usize,

    #[arg(long, default_value_t = 4)]
    pub k: usize,

    #[arg(long)]
    pub correlation: Option<f64>,

    /// Trim set size.
    #[arg(long, default_value_t = 0)]
    pub h: usize,

    /// Trim sets sampled.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
}

fn solver_defaults_help() -> String {
    let c = BcdConfig::default();
    format!(
        "Solver defaults: step 1/L_f, weight step tau = 1/lambda, max_iters {}, tol_stationarity {:e}, \
         tol_objective {:e}, plateau window {}, w_update gradient_step. SCAD a = {}, MCP gamma = {}.\n\
         Exit codes: 0 success, 1 usage error, 2 numerical failure.",
        c.max_iters,
        c.tol_stationarity,
        c.tol_objective,
        trimreg::bcd::PLATEAU_WINDOW,
        trimreg::baselines::SCAD_A,
        trimreg::baselines::MCP_GAMMA,
    )
}

fn plan_help<T: serde::Serialize>(plan: &T) -> String {
    let json = serde_json::to_string_pretty(plan).expect("plans serialize");
    format!("Default config (every key optional in --config):\n{json}")
}
