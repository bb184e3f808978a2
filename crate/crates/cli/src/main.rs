//! `ctlab`: experiment runner for the ctype-lab operator laboratory.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Exact-arithmetic experiments on C-type operators.
#[derive(Debug, Parser)]
#[command(name = "ctlab", version, about, long_about = None)]
pub struct Cli {
    #[command(flatten)]
    pub operator: OperatorArgs,
    /// Directory for JSON/CSV artifacts (stdout when absent).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// How the operator is chosen.
#[derive(Debug, Clone, Args, Serialize)]
pub struct OperatorArgs {
    /// Operator description in JSON (a preset reference or explicit tables).
    #[arg(long, global = true, value_name = "JSON", conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    /// Registered preset name (see `ctlab presets`).
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,
    /// The constant C of a preset that takes one (default: its recorded minimal C).
    #[arg(long = "constant", short = 'C', global = true, value_name = "C")]
    pub constant: Option<u32>,
    /// Number of materialized blocks N_max.
    #[arg(long, global = true, value_name = "N")]
    pub n_max: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the preset registry.
    Presets,
    /// Check the operator's defining constraints on its materialized prefix.
    Validate,
    /// Run every applicable criterion and summarize the verdicts.
    Classify(ClassifyArgs),
    /// Sweep T^j x and record visits to a closed ball.
    Orbit(OrbitArgs),
    /// Estimate c(T) from the visit densities of a seeded sample.
    Densities(DensityArgs),
    /// Build a staged (chaotic / U-frequently / frequently) hypercyclic vector.
    Build {
        #[command(subcommand)]
        kind: BuildKind,
    },
    /// Truncated unimodular eigenvectors.
    Eigen {
        #[command(subcommand)]
        kind: EigenKind,
    },
    /// Validation, classification and the certificate chain in one report.
    Report(ClassifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyArgs {
    /// Generation horizon for parameter tables (closed forms are decided symbolically).
    #[arg(long)]
    pub horizon: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OrbitArgs {
    /// Starting vector as `index:value` pairs, e.g. `0:1,5:-1/2`.
    #[arg(long, default_value = "0:1")]
    pub x: String,
    /// Ball center as `index:value` pairs (empty for 0).
    #[arg(long, default_value = "")]
    pub center: String,
    /// Ball radius (exact: `a`, `a/b` or `m*2^e`).
    #[arg(long, default_value = "1")]
    pub eps: String,
    /// Last step J.
    #[arg(long, default_value_t = 100)]
    pub horizon: u64,
    /// Burn-in for the lower/upper density summary.
    #[arg(long, default_value_t = 0)]
    pub burn_in: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DensityArgs {
    /// Radius of the ball around 0.
    #[arg(long, default_value = "1/2")]
    pub eps: String,
    /// Last step J of every sweep.
    #[arg(long, default_value_t = 4096)]
    pub horizon: u64,
    /// Number of random vectors (e_0 is always included).
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    /// Random vectors are supported in blocks 0..=B.
    #[arg(long, default_value_t = 2)]
    pub blocks: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BuildArgs {
    /// Number of stages J.
    #[arg(long)]
    pub stages: Option<usize>,
    /// Density parameter α as a fraction (U-frequent and frequent builders).
    #[arg(long, default_value = "1/8")]
    pub alpha: String,
    /// Number of targets drawn from the default target pool.
    #[arg(long)]
    pub targets: Option<usize>,
    /// Generations searched by the stage oracle beyond the current one.
    #[arg(long, default_value_t = 16)]
    pub span: u64,
}

#[derive(Debug, Subcommand)]
pub enum BuildKind {
    Chaotic(BuildArgs),
    Ufhc(BuildArgs),
    Fhc(BuildArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CTypeEigenArgs {
    /// The φ-sequence passes through this block.
    #[arg(long, default_value_t = 1)]
    pub through: u64,
    /// Truncation stage M.
    #[arg(long, default_value_t = 12)]
    pub stages: usize,
    /// λ grid: the K-th roots of unity e^{2πij/K}.
    #[arg(long, default_value_t = 16)]
    pub grid: u64,
    /// Explicit angles in radians (replaces the grid).
    #[arg(long, value_delimiter = ',')]
    pub angles: Vec<f64>,
    /// Include every coefficient in the JSON output.
    #[arg(long)]
    pub coefficients: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiagShiftArgs {
    /// Diagonal λ_k = e^{iθ/k}.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Constant weight ω.
    #[arg(long, default_value_t = 2.0)]
    pub weight: f64,
    /// Truncation length M.
    #[arg(long, default_value_t = 60)]
    pub stages: usize,
    /// Number of random λ in the disc D(1, 1).
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    /// Also evaluate at λ_1, …, λ_K.
    #[arg(long, default_value_t = 1)]
    pub diagonal: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum EigenKind {
    /// Eigenvectors of the C-type operator along a φ-sequence.
    Ctype(CTypeEigenArgs),
    /// Eigenvectors of the diagonal-plus-shift operator T e_n = λ_n e_n + ω_{n−1} e_{n−1}.
    Diagshift(DiagShiftArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ctlab: {e}");
            e.exit_code().into()
        }
    }
}
