//! Declarative experiment descriptions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use xmmd_core::{KernelFamily, KernelSpec, SourceSpec};

use crate::error::{invalid, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    NullHist,
    TypeIError,
    PowerCurve,
    Roc,
    Bench,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NullHist => "null_hist",
            Self::TypeIError => "type_i_error",
            Self::PowerCurve => "power_curve",
            Self::Roc => "roc",
            Self::Bench => "bench",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "null_hist" => Self::NullHist,
            "type_i_error" => Self::TypeIError,
            "power_curve" => Self::PowerCurve,
            "roc" => Self::Roc,
            "bench" => Self::Bench,
            other => return Err(invalid(format!("unknown experiment kind `{other}`"))),
        })
    }
}

/// Block size of a block-MMD test, fixed or `⌊√n⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSize {
    Fixed(usize),
    Sqrt,
}

impl BlockSize {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            Self::Fixed(b) => b,
            Self::Sqrt => ((n as f64).sqrt().floor() as usize).max(2),
        }
    }
}

/// A test identifier: `xmmd`, `mmd-perm:<B>`, `block:<b>|sqrt`, `linear`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TestId {
    Xmmd,
    MmdPerm { permutations: usize },
    Block(BlockSize),
    Linear,
}

pub const DEFAULT_PERMUTATIONS: usize = 200;

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Xmmd => f.write_str("xmmd"),
            Self::MmdPerm { permutations } => write!(f, "mmd-perm:{permutations}"),
            Self::Block(BlockSize::Fixed(b)) => write!(f, "block:{b}"),
            Self::Block(BlockSize::Sqrt) => f.write_str("block:sqrt"),
            Self::Linear => f.write_str("linear"),
        }
    }
}

impl FromStr for TestId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((name, arg)) => (name, Some(arg)),
            None => (s, None),
        };
        let count = |arg: &str, what: &str| -> Result<usize> {
            arg.parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| invalid(format!("`{s}`: {what} must be a positive integer")))
        };
        match (name, arg) {
            ("xmmd", None) => Ok(Self::Xmmd),
            ("linear", None) => Ok(Self::Linear),
            ("mmd-perm", None) => Ok(Self::MmdPerm {
                permutations: DEFAULT_PERMUTATIONS,
            }),
            ("mmd-perm", Some(b)) => Ok(Self::MmdPerm {
                permutations: count(b, "permutation count")?,
            }),
            ("block", None | Some("sqrt")) => Ok(Self::Block(BlockSize::Sqrt)),
            ("block", Some(b)) => {
                let b = count(b, "block size")?;
                if b < 2 {
                    return Err(invalid(format!("`{s}`: block size must be >= 2")));
                }
                Ok(Self::Block(BlockSize::Fixed(b)))
            }
            _ => Err(invalid(format!(
                "unknown test `{s}` (expected xmmd, mmd-perm:<B>, block:<b>|sqrt or linear)"
            ))),
        }
    }
}

impl TryFrom<String> for TestId {
    type Error = HarnessError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TestId> for String {
    fn from(t: TestId) -> Self {
        t.to_string()
    }
}

impl TestId {
    /// Checks that the test can run on samples of sizes `n` and `m`.
    pub fn check_sizes(&self, n: usize, m: usize) -> Result<()> {
        let ok = match self {
            Self::Xmmd => n >= 4 && m >= 4,
            Self::MmdPerm { .. } => n >= 2 && m >= 2,
            Self::Block(b) => {
                let b = b.resolve(n);
                n == m && b <= n && (n / b >= 2 || b == n)
            }
            Self::Linear => n == m && n >= 4,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!(
                "test {self} cannot run at (n, m) = ({n}, {m})"
            )))
        }
    }
}

/// A fixed kernel, or the median heuristic recomputed on every trial's pooled sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KernelChoice {
    Fixed {
        kernel: KernelSpec,
    },
    MedianAuto {
        family: KernelFamily,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        degree: Option<u32>,
    },
}

impl KernelChoice {
    pub fn median_gaussian() -> Self {
        Self::MedianAuto {
            family: KernelFamily::Gaussian,
            degree: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Self::MedianAuto { family, degree } = self {
            // Probe the family/degree combination with a placeholder scale.
            KernelSpec::new(*family, 1.0, *degree)?;
        }
        Ok(())
    }
}

fn default_bootstrap() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub source: SourceSpec,
    /// `(n, m)` pairs.
    pub sizes: Vec<(usize, usize)>,
    pub trials: usize,
    pub tests: Vec<TestId>,
    pub alpha: f64,
    pub seed: u64,
    pub kernel: KernelChoice,
    /// Worker threads; `None` uses the global pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Bootstrap resamples for the power band.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

impl ExperimentSpec {
    pub fn new(
        kind: ExperimentKind,
        source: SourceSpec,
        sizes: Vec<(usize, usize)>,
        tests: Vec<TestId>,
    ) -> Self {
        Self {
            kind,
            source,
            sizes,
            trials: 100,
            tests,
            alpha: 0.05,
            seed: 0,
            kernel: KernelChoice::median_gaussian(),
            threads: None,
            bootstrap: default_bootstrap(),
        }
    }

    pub fn trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn kernel(mut self, kernel: KernelChoice) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.source
            .validate()
            .map_err(|e| invalid(format!("source: {e}")))?;
        if self.trials == 0 {
            return Err(invalid("trials: must be >= 1"));
        }
        if self.sizes.is_empty() {
            return Err(invalid("sizes: must list at least one (n, m) pair"));
        }
        if self.tests.is_empty() {
            return Err(invalid("tests: must list at least one test"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!(
                "alpha: must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads: must be >= 1"));
        }
        if self.bootstrap == 0 {
            return Err(invalid("bootstrap: must be >= 1"));
        }
        self.kernel
            .validate()
            .map_err(|e| invalid(format!("kernel: {e}")))?;
        for &(n, m) in &self.sizes {
            for test in &self.tests {
                test.check_sizes(n, m)
                    .map_err(|e| invalid(format!("sizes: {e}")))?;
            }
        }
        match self.kind {
            ExperimentKind::NullHist | ExperimentKind::TypeIError if !self.source.is_null() => {
                Err(invalid(format!(
                    "source: {} needs a null source (eps = 0), got eps = {}",
                    self.kind,
                    self.source.eps()
                )))
            }
            _ => Ok(()),
        }
    }
}
