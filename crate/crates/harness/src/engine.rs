//! Per-trial data generation and test dispatch.

use xmmd_core::baselines::{block_mmd_test, linear_mmd_test, permutation_test};
use xmmd_core::datagen::{mix_stream, sample, splitmix64};
use xmmd_core::kernels::median_gram;
use xmmd_core::{
    gram_matrix, median_bandwidth, mmd_u_statistic, xmmd_test, GramBlocks, KernelSpec,
    PermutationPlan, RngState, SampleMatrix, SourceSpec, SplitPlan, TestResult, Which,
};

use crate::error::Result;
use crate::spec::{KernelChoice, TestId};

/// Stream roles under `(size index, trial)`.
const ROLE_X: u64 = 0;
const ROLE_Y: u64 = 1;
const ROLE_PERM: u64 = 2;

/// Coordinates of one Monte Carlo draw.
#[derive(Debug, Clone, Copy)]
pub struct TrialKey {
    pub seed: u64,
    pub size_index: usize,
    pub trial: usize,
    /// Distinguishes the null and alternative arms of ROC runs.
    pub arm: u64,
}

impl TrialKey {
    fn state(&self, role: u64) -> RngState {
        RngState::derive(
            self.seed,
            &[self.arm, self.size_index as u64, self.trial as u64, role],
        )
    }

    pub fn permutation_seed(&self) -> u64 {
        splitmix64(
            self.seed
                ^ mix_stream(&[
                    self.arm,
                    self.size_index as u64,
                    self.trial as u64,
                    ROLE_PERM,
                ]),
        )
    }
}

pub fn draw(
    source: &SourceSpec,
    n: usize,
    m: usize,
    key: TrialKey,
) -> Result<(SampleMatrix, SampleMatrix)> {
    let x = sample(source, Which::P, n, key.state(ROLE_X))?;
    let y = sample(source, Which::Q, m, key.state(ROLE_Y))?;
    Ok((x, y))
}

/// The trial's kernel and, when the permutation test is listed, its pooled gram matrix.
pub struct Prepared {
    pub spec: KernelSpec,
    pub gram: Option<GramBlocks>,
}

fn needs_gram(tests: &[TestId]) -> bool {
    tests.iter().any(|t| matches!(t, TestId::MmdPerm { .. }))
}

pub fn prepare(
    kernel: &KernelChoice,
    tests: &[TestId],
    x: &SampleMatrix,
    y: &SampleMatrix,
) -> Result<Prepared> {
    let with_gram = needs_gram(tests);
    Ok(match *kernel {
        KernelChoice::Fixed { kernel } => Prepared {
            spec: kernel,
            gram: with_gram.then(|| gram_matrix(&kernel, x, y)).transpose()?,
        },
        KernelChoice::MedianAuto { family, degree } if with_gram => {
            let (spec, gram) = median_gram(x, y, family, degree)?;
            Prepared {
                spec,
                gram: Some(gram),
            }
        }
        KernelChoice::MedianAuto { family, degree } => Prepared {
            spec: KernelSpec::new(family, median_bandwidth(x, y, family)?, degree)?,
            gram: None,
        },
    })
}

fn gram_of(prepared: &Prepared) -> &GramBlocks {
    prepared
        .gram
        .as_ref()
        .expect("prepare builds the gram matrix whenever a gram-based test is listed")
}

/// Runs one calibrated test on prepared trial data.
pub fn run_test(
    test: TestId,
    x: &SampleMatrix,
    y: &SampleMatrix,
    prepared: &Prepared,
    alpha: f64,
    key: TrialKey,
) -> Result<TestResult> {
    let spec = prepared.spec;
    let result = match test {
        TestId::Xmmd => {
            let plan = SplitPlan::balanced(x.n(), y.n())?;
            xmmd_test(x, y, &spec, alpha, &plan)?
        }
        TestId::MmdPerm { permutations } => {
            let plan = PermutationPlan::new(permutations, key.permutation_seed())?;
            permutation_test(gram_of(prepared), alpha, &plan)?.with_context(x.d(), spec)
        }
        TestId::Block(b) => {
            let fallback =
                PermutationPlan::new(crate::spec::DEFAULT_PERMUTATIONS, key.permutation_seed())?;
            block_mmd_test(x, y, &spec, b.resolve(x.n()), alpha, &fallback)?
        }
        TestId::Linear => linear_mmd_test(x, y, &spec, alpha)?,
    };
    Ok(result)
}

/// The test's statistic without calibration (the permutation test contributes
/// its raw U-statistic, so no permutations are drawn).
pub fn statistic_only(
    test: TestId,
    x: &SampleMatrix,
    y: &SampleMatrix,
    prepared: &Prepared,
    key: TrialKey,
) -> Result<f64> {
    match test {
        TestId::MmdPerm { .. } => Ok(mmd_u_statistic(gram_of(prepared))?),
        TestId::Xmmd | TestId::Block(_) | TestId::Linear => {
            Ok(run_test(test, x, y, prepared, 0.05, key)?.statistic)
        }
    }
}
