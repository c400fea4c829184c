//! `mpmi` — command-line front end for the solvers and the experiment harness.
//!
//! Exit codes: 0 success, 2 input error (bad flags, unreadable or malformed
//! files, invalid config), 3 solver error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpmi_core::Method;

#[derive(Debug, Parser)]
#[command(
    name = "mpmi",
    version,
    about = "Stable solvers for ill-conditioned systems with a noisy right-hand side"
)]
struct Cli {
    /// Worker threads for `experiment` (defaults to all cores).
    #[arg(long, global = true, env = "MPMI_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve A z = u with one of the regularized methods and print a JSON report.
    Solve(SolveArgs),
    /// Build the minimal pseudoinverse of an approximate matrix for error level h.
    Pinv(PinvArgs),
    /// Singular values, numerical rank and condition number of a matrix.
    SvdReport(SvdReportArgs),
    /// Run the Poisson-kernel comparison over noise levels and seeds.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Mpmi,
    Mpm,
    Tsvd,
    Tr,
    Morozov,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Mpmi => Method::Mpmi,
            MethodArg::Mpm => Method::Mpm,
            MethodArg::Tsvd => Method::Tsvd,
            MethodArg::Tr => Method::Tr,
            MethodArg::Morozov => Method::Morozov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    /// delta^2 plus the out-of-range residual floor.
    Floor,
    /// delta^2 alone.
    Plain,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("param").required(true).args(["delta_rel", "delta_abs", "alpha", "rank", "h"])))]
pub struct SolveArgs {
    /// Matrix file (.csv or .mtx).
    #[arg(long)]
    matrix: PathBuf,
    /// Right-hand side file (n x 1 or 1 x n).
    #[arg(long)]
    rhs: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Relative noise level; converted with the norm of the given right-hand side.
    #[arg(long)]
    delta_rel: Option<f64>,
    /// Absolute noise level |u_delta - u|.
    #[arg(long)]
    delta_abs: Option<f64>,
    /// Regularization parameter for tr / morozov.
    #[arg(long)]
    alpha: Option<f64>,
    /// Truncation rank for tsvd.
    #[arg(long)]
    rank: Option<usize>,
    /// Matrix error level for mpm.
    #[arg(long)]
    h: Option<f64>,
    /// Discrepancy target for tr / morozov.
    #[arg(long, value_enum, default_value_t = TargetArg::Floor)]
    target: TargetArg,
    /// Absolute singular-value cutoff for the numerical rank.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Write the JSON report here instead of standard output. Solutions longer
    /// than 1000 entries then go to a sidecar `<out>.solution.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PinvArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Matrix error level, h > 0.
    #[arg(long)]
    h: f64,
    /// Write the pseudoinverse here (.csv or .mtx) and the summary to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the filtered matrix itself: to PATH if given, else to
    /// `<out>.matrix.csv`, else after the pseudoinverse on standard output.
    #[arg(long, value_name = "PATH", num_args = 0..=1)]
    emit_matrix: Option<Option<PathBuf>>,
}

#[derive(Debug, Args)]
pub struct SvdReportArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Absolute singular-value cutoff for the numerical rank.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Write the `k,sigma` CSV here and the summary to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// key=value config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Use the 1991 x 2001 grid (slow: minutes, a few hundred MB).
    #[arg(long)]
    full_scale: bool,
    /// Shift the configured seed list so it starts at this value.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(err) => {
            let code = commands::exit_code(&err);
            eprintln!("error: {}", commands::describe(&err));
            ExitCode::from(code)
        }
    }
}
