use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "plshoot", version, about = "Radial shooting solver for -Δ_p u = K(|x|) f(u)")]
pub struct Cli {
    /// Worker threads for independent shots (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Largest radius a shot may reach.
    #[arg(long, global = true)]
    pub rmax: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify the hypotheses on K and f.
    Check(CheckArgs),
    /// Integrate one shot and write its profile.
    Integrate(IntegrateArgs),
    /// Classify one height or a range of heights.
    Classify(ClassifyArgs),
    /// Bracket the ground-state height by bisection.
    GroundState(GroundStateArgs),
    /// Solve the Dirichlet problem on a ball of given radius.
    Dirichlet(DirichletArgs),
    /// Solve the variational equation along one shot.
    Variational(VariationalArgs),
    /// Transform an (a, b) problem to K-form.
    Transform(TransformArgs),
    /// Run the verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Model configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Report destination (`-` for standard output).
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub alpha: f64,
    /// Relative integration tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Profile CSV (`-` for standard output).
    #[arg(long, default_value = "-")]
    pub out: String,
    /// Summary JSON; defaults to the CSV path with a `.json` extension.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpacingArg {
    Geometric,
    Linear,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, conflicts_with = "alpha_range", required_unless_present = "alpha_range")]
    pub alpha: Option<f64>,
    /// `LO:HI:N`.
    #[arg(long)]
    pub alpha_range: Option<String>,
    #[arg(long, value_enum, default_value = "geometric")]
    pub spacing: SpacingArg,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Sweep CSV (`-` for standard output, which replaces the JSON records).
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct GroundStateArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Positive and crossing ends of the bracket.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], conflicts_with = "sweep")]
    pub bracket: Option<Vec<f64>>,
    /// Locate the bracket with a sweep `LO:HI:N` first.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Target bracket width.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Relative integration tolerance.
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct DirichletArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub radius: f64,
    /// Height of a crossing shot to start from.
    #[arg(long)]
    pub seed: f64,
    /// Tolerance on the radius.
    #[arg(long, default_value_t = 1e-10)]
    pub radius_tol: f64,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Profile CSV of the solution.
    #[arg(long)]
    pub out: Option<String>,
    /// Summary JSON (`-` for standard output).
    #[arg(long, default_value = "-")]
    pub report: String,
}

#[derive(Debug, Args)]
pub struct VariationalArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub tol: Option<f64>,
    /// CSV with columns `r,phi,dphi,theta`.
    #[arg(long, default_value = "-")]
    pub out: String,
    /// Relative step for a finite-difference comparison.
    #[arg(long)]
    pub fd_check: Option<f64>,
    /// Report JSON (`-` for standard output).
    #[arg(long)]
    pub report: Option<String>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// (a, b) problem configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Where to write the K-form model config (`-` for standard output).
    #[arg(long, default_value = "-")]
    pub out: String,
    /// Sampled map table, CSV `r,t,h,K_tilde`.
    #[arg(long)]
    pub table: Option<String>,
    /// Radial grid `LO:HI:N` (geometric).
    #[arg(long, default_value = "1e-6:1e6:2401")]
    pub grid: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Hypotheses,
    Separation,
    Uniqueness,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Model configuration; the canonical Matukuma model when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value = "-")]
    pub report: String,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    pub bracket: Option<Vec<f64>>,
    /// Sweep `LO:HI:N` used to find the bracket; defaults to `1.01·u0:50·u0:64`.
    #[arg(long, conflicts_with = "bracket")]
    pub sweep: Option<String>,
    #[arg(long, default_value_t = 1e-2)]
    pub delta: f64,
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
    #[arg(long)]
    pub tol: Option<f64>,
}
