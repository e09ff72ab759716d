use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "awd", version, about = "Adapted Wasserstein distances on scenario trees")]
pub struct Cli {
    #[command(flatten)]
    pub out: OutputArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Also write an SVG line plot, where the command has one.
    #[arg(long, global = true)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Adapted Wasserstein distance between two tree files.
    Dist(DistArgs),
    /// Classical Wasserstein distance between the path laws (sup norm) or terminal laws.
    Wass(WassArgs),
    /// Weak transport cost between two distributions or terminal laws.
    Weak(PairP),
    /// AW_p(P, δ_0) of a tree.
    Seminorm(SeminormArgs),
    /// Risk and utility optimisers.
    #[command(subcommand)]
    Hedge(HedgeCommand),
    /// Projects a strategy on the first tree onto the second along an optimal coupling.
    Project(ProjectArgs),
    /// Randomised and fixed-instance checks of the stability bounds.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Model generators writing tree files.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Lp,
    Dp,
    Sync,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Auto,
    Dense,
    Sparse,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = Method::Lp)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
    pub backend: BackendArg,
    /// Write the optimal leaf coupling as a CSV matrix.
    #[arg(long)]
    pub coupling: Option<PathBuf>,
    pub first: PathBuf,
    pub second: PathBuf,
}

#[derive(Debug, Args)]
pub struct WassArgs {
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Compare the laws of the terminal values only.
    #[arg(long)]
    pub terminal: bool,
    pub first: PathBuf,
    pub second: PathBuf,
}

#[derive(Debug, Args)]
pub struct PairP {
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Distribution file (`{"atoms": [...]}`) or tree file.
    pub first: PathBuf,
    pub second: PathBuf,
}

#[derive(Debug, Args)]
pub struct SeminormArgs {
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    pub tree: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClaimArgs {
    /// `call:K`, `const:C`, `zero` or `max-affine:FILE`.
    #[arg(long, default_value = "call:0")]
    pub claim: String,
    /// Bound on the absolute position.
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
}

#[derive(Debug, Subcommand)]
pub enum HedgeCommand {
    /// Minimises AVaR_α(C − m − (H·X)_T) over m and |H| ≤ k.
    Avar {
        #[command(flatten)]
        claim: ClaimArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        tree: PathBuf,
    },
    /// Minimises E[ℓ(C − m − (H·X)_T)] over |H| ≤ k for fixed m.
    Loss {
        #[command(flatten)]
        claim: ClaimArgs,
        #[arg(long, default_value_t = 0.0)]
        m: f64,
        /// `positive`, `exp:RATE` or `pl:SLOPE:INTERCEPT,...`.
        #[arg(long, default_value = "positive")]
        loss: String,
        tree: PathBuf,
    },
    /// Maximises E[U(C + (H·X)_T)] over |H| ≤ k.
    Utility {
        #[command(flatten)]
        claim: ClaimArgs,
        /// `capped:CAP`, `explin:A` or `exp:A`.
        #[arg(long, default_value = "explin:1")]
        utility: String,
        tree: PathBuf,
    },
    /// Indifference price of the claim.
    Indiff {
        #[command(flatten)]
        claim: ClaimArgs,
        #[arg(long, default_value = "explin:1")]
        utility: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        tree: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Strategy file on the first tree: `{"bound": k, "positions": [...]}`, inner nodes in preorder.
    #[arg(long)]
    pub strategy: PathBuf,
    /// Order of the coupling used for the projection.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    pub first: PathBuf,
    pub second: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Random instances to draw when no trees are given.
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Horizon of generated trees.
    #[arg(long, default_value_t = 2)]
    pub horizon: usize,
    /// Two tree files to check instead of random pairs.
    #[arg(num_args = 0..=2)]
    pub trees: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Weak hedging inequality with the projected strategy.
    Whi {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 0.0)]
        m: f64,
    },
    /// Strong hedging inequality for Lipschitz prefix strategies.
    Shi {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 0.0)]
        m: f64,
    },
    /// Lipschitz continuity of the optimal AVaR hedge value.
    Avar {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
    },
    /// Weak-transport contraction of hedged positions.
    Contraction {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// Symmetry, identity and triangle inequality on random triples or given trees.
    Metric {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// At least three tree files; random triples otherwise.
        trees: Vec<PathBuf>,
    },
    /// AW_2 between binomial walks against the volatility-gap formula.
    Scaling {
        /// Step counts.
        #[arg(long = "N", value_delimiter = ',', default_value = "4")]
        steps: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        schedules: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Synchronous AW_2² between GBM lattices against the continuous-time closed form.
    Gbm {
        #[arg(long, default_value_t = 0.2)]
        sigma1: f64,
        #[arg(long, default_value_t = 0.3)]
        sigma2: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
        #[arg(long = "N", value_delimiter = ',', default_value = "25,50,100")]
        steps: Vec<usize>,
    },
    /// Reproduces the discrete counterexample models.
    Counterexamples {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuantArg {
    Binomial,
    GaussHermite,
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Quantised random walk on [0, 1].
    Walk {
        #[arg(long = "N")]
        steps: usize,
        /// Per-step volatilities; one value means constant.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        sigma: Vec<f64>,
        #[arg(long, value_enum, default_value_t = QuantArg::Binomial)]
        quant: QuantArg,
        /// Points per Gauss–Hermite step.
        #[arg(long, default_value_t = 3)]
        points: usize,
    },
    /// Multiplicative binomial martingale from 1.
    Gbm {
        #[arg(long = "N")]
        steps: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
    },
    /// Euler tree with constant drift and volatility.
    Diffusion {
        #[arg(long = "N")]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
    },
    /// Writes every counterexample pair into a directory.
    Counterexamples {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        dir: PathBuf,
    },
}
