//! `jmsteer`: joint measurability, steering and LHV decompositions from the shell.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "jmsteer", version)]
#[command(about = "Joint measurability and steering by conic feasibility")]
pub struct Cli {
    /// Feasibility and duality-gap tolerance of the conic solver
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,

    /// Interior point iteration limit
    #[arg(long, global = true, default_value_t = 120)]
    pub max_iter: usize,

    /// Seed for every randomized path
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for `lhv scan` (0: machine parallelism)
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Joint measurability of a measurement set
    #[command(subcommand)]
    Jm(JmCommand),
    /// Steerability of an assemblage
    #[command(subcommand)]
    Steer(SteerCommand),
    /// Conversions between measurement sets and assemblages
    #[command(subcommand)]
    Bridge(BridgeCommand),
    /// Fermat–Torricelli criterion for three qubit measurements
    #[command(subcommand)]
    Ft(FtCommand),
    /// LHV decompositions of the two-qubit family
    #[command(subcommand)]
    Lhv(LhvCommand),
    /// Print a named measurement set as JSON
    Stdlib(StdlibArgs),
}

/// Where a measurement set comes from: a JSON file or a named set.
#[derive(Args, Debug, Clone)]
pub struct SetInput {
    /// Measurements JSON file (`-` for stdin)
    #[arg(long, short, conflicts_with = "stdlib")]
    pub input: Option<PathBuf>,

    /// Named set instead of a file
    #[arg(long)]
    pub stdlib: Option<String>,

    /// Sharpness of the named set
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,

    /// Unit vectors for `spin_directions`, as `x,y,z;x,y,z`
    #[arg(long, allow_hyphen_values = true)]
    pub directions: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum JmCommand {
    /// Decide joint measurability
    Check(SetInput),
    /// Largest white-noise parameter keeping the set jointly measurable
    Robustness {
        #[command(flatten)]
        set: SetInput,
        /// Use bisection with this resolution instead of the direct SDP
        #[arg(long)]
        bisection: Option<f64>,
    },
    /// Parent POVM of the set depolarized to `lambda`
    Parent {
        #[command(flatten)]
        set: SetInput,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
}

/// An assemblage JSON file, or the maximally entangled assemblage of a named set.
#[derive(Args, Debug, Clone)]
pub struct AsmInput {
    /// Assemblage JSON file (`-` for stdin)
    #[arg(long, short, conflicts_with = "stdlib")]
    pub input: Option<PathBuf>,

    /// Steer the maximally entangled state with this named set
    #[arg(long)]
    pub stdlib: Option<String>,

    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,

    #[arg(long, allow_hyphen_values = true)]
    pub directions: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum SteerCommand {
    /// Decide whether an LHS model exists
    Check(AsmInput),
    /// Largest white-noise parameter keeping the assemblage unsteerable
    Robustness {
        #[command(flatten)]
        asm: AsmInput,
        #[arg(long)]
        bisection: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum BridgeCommand {
    /// Assemblage of the maximally entangled state
    ToAssemblage(SetInput),
    /// Measurements behind an assemblage with maximally mixed marginal
    ToMeasurements {
        /// Assemblage JSON file (`-` for stdin)
        #[arg(long, short)]
        input: PathBuf,
    },
    /// Compare state noise with measurement noise
    DualityCheck {
        #[command(flatten)]
        set: SetInput,
        /// Bipartite state as a matrix JSON file (default: maximally entangled)
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long)]
        lambda: f64,
    },
    /// Noise threshold for sharp observables in dimension `d`
    Threshold {
        #[arg(long)]
        d: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum FtCommand {
    /// Evaluate the criterion on three Bloch vectors or a qubit assemblage
    Eval {
        #[arg(long, allow_hyphen_values = true, requires_all = ["x2", "x3"], conflicts_with = "input")]
        x1: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        x2: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        x3: Option<String>,
        /// Assemblage JSON file (`-` for stdin)
        #[arg(long, short)]
        input: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct ClassArgs {
    /// Classes joined by `,` or `+`: noisy_bell, sym_ext_A_2, sym_ext_B, sym_ext_B_<m>
    #[arg(long, default_value = "noisy_bell,sym_ext_A_2")]
    pub classes: String,

    /// Total copies of B for `sym_ext_B`
    #[arg(long)]
    pub n_bob: Option<usize>,

    /// Also require the extensions to be PPT
    #[arg(long)]
    pub ppt: bool,
}

#[derive(Subcommand, Debug)]
pub enum LhvCommand {
    /// Decompose one member of the family, or find its largest decomposable lambda
    Decompose {
        /// Schmidt coefficient in [1/sqrt2, 1]
        #[arg(long)]
        s: f64,
        /// Mixing parameter; omitted means maximize it
        #[arg(long)]
        lambda: Option<f64>,
        /// Euler angles of U_A as `alpha,beta,gamma`
        #[arg(long, allow_hyphen_values = true, default_value = "0,0,0")]
        ua: String,
        #[command(flatten)]
        classes: ClassArgs,
    },
    /// Minimum over U_A of the largest decomposable lambda on a grid of s
    Scan {
        /// `start:stop:count` or a comma-separated list
        #[arg(long, default_value = "0.7071067811865476:1:8")]
        s_grid: String,
        /// Euler grid `n_alpha x n_beta x n_gamma`
        #[arg(long, default_value = "6x6x6")]
        ua_grid: String,
        /// Haar-random U_A samples added to the grid
        #[arg(long, default_value_t = 50)]
        ua_random: usize,
        #[command(flatten)]
        classes: ClassArgs,
        /// Also write the curve as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct StdlibArgs {
    pub name: String,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub directions: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return output::finish(Err(output::CliError::input(e.render().to_string().trim_end()))),
    };
    output::finish(commands::run(&cli))
}
