//! `binsis`: sample, count and diagnose binary matrices with fixed margins.

mod commands;
mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use binsis::Heuristic;

#[derive(Parser)]
#[command(name = "binsis", version, about = "Sequential importance sampling of binary matrices with fixed margins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check whether any matrix has the given margins (and zeros).
    Feasible(InputArgs),
    /// Draw matrices and write them with their log proposal probabilities.
    Sample {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Output directory for `matrices.txt` and `weights.log`; stdout if
        /// omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the number of matrices from importance weights.
    Count {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Weight diagnostics for every applicable heuristic.
    Diagnose {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Log proposal probability of a given matrix.
    Eval {
        #[command(flatten)]
        input: InputArgs,
        /// Matrix file: one row per line, 0/1 entries separated by spaces.
        #[arg(long)]
        matrix: PathBuf,
    },
    /// External uniformity checks against uniform or adversarial matrices.
    CheckUniformity {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        mode: UniformityMode,
        /// Number of replicates for `rowgen`.
        #[arg(long = "L", default_value_t = 100)]
        replicates: usize,
    },
    /// Exact number of matrices by memoised recursion.
    ExactCount {
        #[command(flatten)]
        input: InputArgs,
        /// Maximum number of memoised states.
        #[arg(long, default_value_t = binsis::oracle::DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Write every matrix of a small instance.
    Enumerate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Total-variation distance between the proposal and uniform, by
    /// enumeration.
    TvDistance(InputArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Margins file: "m n", then the row sums, then the column sums.
    #[arg(long)]
    margins: PathBuf,
    /// Structural zeros: one 1-based "i j" pair per line.
    #[arg(long, conflicts_with = "zero_diagonal")]
    zeros: Option<PathBuf>,
    /// Structural zeros on the diagonal.
    #[arg(long)]
    zero_diagonal: bool,
    /// Accept more than one structural zero per row or column. Sampling may
    /// then fail part way.
    #[arg(long)]
    allow_general_zeros: bool,
    #[arg(long, value_enum, default_value_t = HeuristicArg::Cgm)]
    heuristic: HeuristicArg,
    /// Sample columns in file order instead of by decreasing sum.
    #[arg(long)]
    keep_column_order: bool,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Number of draws.
    #[arg(long = "n", default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum HeuristicArg {
    Cgm,
    Binomial,
    Gmw,
    Oneil,
    CgmSz,
    BinomialSz,
    OneilSz,
}

impl From<HeuristicArg> for Heuristic {
    fn from(h: HeuristicArg) -> Self {
        match h {
            HeuristicArg::Cgm => Heuristic::Cgm,
            HeuristicArg::Binomial => Heuristic::Binomial,
            HeuristicArg::Gmw => Heuristic::Gmw,
            HeuristicArg::Oneil => Heuristic::Oneil,
            HeuristicArg::CgmSz => Heuristic::CgmSz,
            HeuristicArg::BinomialSz => Heuristic::BinomialSz,
            HeuristicArg::OneilSz => Heuristic::OneilSz,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum UniformityMode {
    /// Rows drawn independently and uniformly.
    Rowgen,
    /// Block-diagonal matrix of ones (square regular margins).
    Block,
    /// Greedy fill of each column into the last available rows.
    Greedy,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    match commands::run(cli.command, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
