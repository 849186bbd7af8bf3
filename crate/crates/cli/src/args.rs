//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use xmmd_core::KernelFamily;
use xmmd_harness::{BlockSize, TestId};

#[derive(Debug, Parser)]
#[command(
    name = "xmmd",
    version,
    about = "Kernel two-sample tests and their Monte Carlo experiments"
)]
pub struct Cli {
    /// Worker threads (defaults to XMMD_THREADS, then the number of cores).
    #[arg(long, global = true, value_parser = positive_usize)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one test on two CSV samples and print the result as JSON.
    Test(TestArgs),
    /// Null-distribution simulation: raw statistics plus KS distance to N(0,1).
    NullSim(ExperimentArgs),
    /// Rejection rate against sample size (type-I error when --eps is 0).
    PowerCurve(ExperimentArgs),
    /// ROC curves and AUC from matched null and alternative trials.
    Roc(ExperimentArgs),
    /// Median wall time per test and size.
    Bench(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelArg {
    Gaussian,
    Laplace,
    Poly(u32),
}

impl KernelArg {
    pub fn family(self) -> KernelFamily {
        match self {
            Self::Gaussian => KernelFamily::Gaussian,
            Self::Laplace => KernelFamily::Laplace,
            Self::Poly(_) => KernelFamily::Polynomial,
        }
    }

    pub fn degree(self) -> Option<u32> {
        match self {
            Self::Poly(r) => Some(r),
            _ => None,
        }
    }
}

fn parse_kernel(s: &str) -> Result<KernelArg, String> {
    match s {
        "gaussian" => Ok(KernelArg::Gaussian),
        "laplace" => Ok(KernelArg::Laplace),
        _ => {
            let degree = s
                .strip_prefix("poly:")
                .and_then(|r| r.parse::<u32>().ok())
                .filter(|&r| r >= 1)
                .ok_or_else(|| format!("`{s}`: expected gaussian, laplace or poly:<degree>"))?;
            Ok(KernelArg::Poly(degree))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleArg {
    Median,
    Fixed(f64),
}

fn parse_scale(s: &str) -> Result<ScaleArg, String> {
    if s == "median" {
        return Ok(ScaleArg::Median);
    }
    positive_f64(s).map(ScaleArg::Fixed)
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("`{s}` is not a positive integer")),
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(a) if a > 0.0 && a < 1.0 => Ok(a),
        _ => Err(format!("`{s}`: alpha must lie strictly between 0 and 1")),
    }
}

fn parse_test(s: &str) -> Result<TestId, String> {
    s.parse()
        .map_err(|e: xmmd_harness::HarnessError| e.to_string())
}

fn parse_block(s: &str) -> Result<BlockSize, String> {
    if s == "sqrt" {
        Ok(BlockSize::Sqrt)
    } else {
        positive_usize(s).map(BlockSize::Fixed)
    }
}

/// `n` for `n = m`, or `n:m`.
fn parse_size(s: &str) -> Result<(usize, usize), String> {
    match s.split_once(':') {
        Some((n, m)) => Ok((positive_usize(n)?, positive_usize(m)?)),
        None => positive_usize(s).map(|n| (n, n)),
    }
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// gaussian, laplace or poly:<degree>.
    #[arg(long, default_value = "gaussian", value_parser = parse_kernel)]
    pub kernel: KernelArg,
    /// Kernel scale, or `median` for the median heuristic on the pooled sample.
    #[arg(long, default_value = "median", value_parser = parse_scale, conflicts_with = "scale_div")]
    pub scale: ScaleArg,
    /// Polynomial kernel written as (1 + x·y / s)^r; sets the scale to 1/s.
    #[arg(long, value_parser = positive_f64)]
    pub scale_div: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV file with the X sample (rows are observations).
    pub x: PathBuf,
    /// CSV file with the Y sample.
    pub y: PathBuf,
    /// xmmd, mmd-perm[:B], block[:b|sqrt] or linear.
    #[arg(long, default_value = "xmmd", value_parser = parse_test)]
    pub test: TestId,
    /// Permutations for mmd-perm.
    #[arg(long = "B", value_parser = positive_usize)]
    pub permutations: Option<usize>,
    /// Block size for the block test (integer or `sqrt`).
    #[arg(long, value_parser = parse_block)]
    pub block_size: Option<BlockSize>,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    pub alpha: f64,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Seeds the split shuffle and the permutations.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Split each sample in file order instead of after a seeded shuffle.
    #[arg(long)]
    pub no_shuffle: bool,
    /// The first non-comment line of each CSV is a header.
    #[arg(long)]
    pub header: bool,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    /// N(0, I) against N(a, I), with eps on the first j coordinates of a.
    Gmd,
    /// Dirichlet(1) against Dirichlet(1 + eps).
    Dirichlet,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Read the whole experiment from a JSON spec instead of flags.
    #[arg(long, conflicts_with_all = [
        "source", "d", "j", "eps", "sizes", "trials", "tests", "alpha", "seed", "kernel", "scale",
        "scale_div", "bootstrap",
    ])]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gmd")]
    pub source: SourceArg,
    #[arg(long, default_value_t = 10, value_parser = positive_usize)]
    pub d: usize,
    /// Shifted coordinates for gmd [default: min(5, d)].
    #[arg(long, value_parser = positive_usize)]
    pub j: Option<usize>,
    /// Size of the perturbation; 0 gives the null.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Comma-separated sizes, each `n` (with m = n) or `n:m`.
    #[arg(long, value_delimiter = ',', value_parser = parse_size)]
    pub sizes: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    pub trials: usize,
    /// Comma-separated tests: xmmd, mmd-perm[:B], block[:b|sqrt], linear.
    #[arg(long, value_delimiter = ',', default_value = "xmmd", value_parser = parse_test)]
    pub tests: Vec<TestId>,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Bootstrap resamples for the power standard deviation.
    #[arg(long, default_value_t = 200, value_parser = positive_usize)]
    pub bootstrap: usize,
    /// Output prefix: writes <out>.csv, <out>.json and any raw or ROC files.
    #[arg(long, default_value = "xmmd-results")]
    pub out: PathBuf,
}
