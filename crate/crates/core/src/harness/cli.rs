//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::{run, ExperimentConfig, ExperimentKind, HarnessError, Overrides};

#[derive(Debug, Parser)]
#[command(name = "forest-lab", version, about = "Centered random forest experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file or a previous manifest.json; flags override its fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed (required here or in the config).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory [default: results].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Trees per forest (adaptive trees for adaptive-hist).
    #[arg(long, value_name = "M")]
    trees: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// MSE against n with the tuned leaf count.
    RiskSweep(Common),
    /// Variance and squared bias on an (n, k_n) grid.
    Decompose(Common),
    /// Expected overlap of two random leaves: enumeration against tree pairs.
    Overlap(Common),
    /// Halving expectation of two multinomials: enumeration, sampling, bounds.
    Multinomial(Common),
    /// Split counts of adaptive trees on the noiseless linear model.
    AdaptiveHist {
        #[command(flatten)]
        common: Common,
        /// Seed for drawing beta from U[-1, 1]^d.
        #[arg(long, value_name = "U64")]
        beta_seed: Option<u64>,
        /// Tree depth.
        #[arg(long, value_name = "D")]
        depth: Option<u32>,
    },
    /// Root-level selection probabilities from a second sample.
    LearnProbs(Common),
    /// Rate exponents for S = 1..S_max.
    BoundsTable(Common),
    /// Pointwise MSE at fixed points across n.
    Consistency(Common),
}

impl Command {
    fn split(self) -> (ExperimentKind, Common, Option<u64>, Option<u32>) {
        match self {
            Command::RiskSweep(c) => (ExperimentKind::RiskSweep, c, None, None),
            Command::Decompose(c) => (ExperimentKind::Decompose, c, None, None),
            Command::Overlap(c) => (ExperimentKind::Overlap, c, None, None),
            Command::Multinomial(c) => (ExperimentKind::Multinomial, c, None, None),
            Command::AdaptiveHist {
                common,
                beta_seed,
                depth,
            } => (ExperimentKind::AdaptiveHist, common, beta_seed, depth),
            Command::LearnProbs(c) => (ExperimentKind::LearnProbs, c, None, None),
            Command::BoundsTable(c) => (ExperimentKind::BoundsTable, c, None, None),
            Command::Consistency(c) => (ExperimentKind::Consistency, c, None, None),
        }
    }
}

/// Parses `args` (program name first), runs the experiment and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (kind, common, beta_seed, depth) = cli.command.split();
    let result = (|| {
        let config = match &common.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let overrides = Overrides {
            seed: common.seed,
            out: common.out,
            threads: common.threads,
            trees: common.trees,
            beta_seed,
            depth,
        };
        run(kind, config, &overrides)
    })();
    match result {
        Ok(report) => {
            println!(
                "wrote {} ({} rows) and {}",
                report.csv.display(),
                report.rows,
                report.manifest.display()
            );
            0
        }
        Err(e) => {
            eprintln!("forest-lab: {e}");
            e.exit_code()
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}
