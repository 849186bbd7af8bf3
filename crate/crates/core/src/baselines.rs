//! Classical MMD: the quadratic-time U-statistic with permutation
//! calibration, and the cheaper block and linear variants with Gaussian
//! calibration.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::normal_quantile;
use crate::datagen::RngState;
use crate::error::{check_alpha, Error, Result};
use crate::kernels::{gram_matrix, GramBlocks, KernelSpec};
use crate::result::{Calibration, TestMeta, TestResult};
use crate::sample::SampleMatrix;
use crate::stats::{mean, sample_variance, studentized_ratio};

/// `h(x, x', y, y') = k(x, x') − k(x, y') − k(y, x') + k(y, y')` read from a gram matrix,
/// with `x = X_i`, `x' = X_i2`, `y = Y_j`, `y' = Y_j2`.
pub fn h_mmd(gram: &GramBlocks, i: usize, i2: usize, j: usize, j2: usize) -> Result<f64> {
    for index in [i, i2] {
        if index >= gram.n() {
            return Err(Error::IndexOutOfRange {
                index,
                len: gram.n(),
            });
        }
    }
    for index in [j, j2] {
        if index >= gram.m() {
            return Err(Error::IndexOutOfRange {
                index,
                len: gram.m(),
            });
        }
    }
    Ok(gram.xx(i, i2) - gram.xy(i, j2) - gram.xy(i2, j) + gram.yy(j, j2))
}

fn check_u_sizes(n: usize, m: usize) -> Result<()> {
    if n < 2 || m < 2 {
        return Err(Error::InvalidInput(format!(
            "MMD U-statistic needs n >= 2 and m >= 2, got n={n}, m={m}"
        )));
    }
    Ok(())
}

fn u_statistic_from_sums(xx_off: f64, xy: f64, yy_off: f64, n: usize, m: usize) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    xx_off / (nf * (nf - 1.0)) + yy_off / (mf * (mf - 1.0)) - 2.0 * xy / (nf * mf)
}

/// Unbiased MMD² U-statistic over all `i ≠ i'`, `j ≠ j'`, from gram block sums.
pub fn mmd_u_statistic(gram: &GramBlocks) -> Result<f64> {
    let (n, m) = (gram.n(), gram.m());
    check_u_sizes(n, m)?;
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for a in 0..n {
        let row = gram.row(a);
        xx += row[..n].iter().sum::<f64>() - row[a];
        xy += row[n..].iter().sum::<f64>();
    }
    for b in 0..m {
        let row = gram.row(n + b);
        yy += row[n..].iter().sum::<f64>() - row[n + b];
    }
    Ok(u_statistic_from_sums(xx, xy, yy, n, m))
}

/// The U-statistic after relabelling: pooled points `perm[..n]` play `X`,
/// `perm[n..]` play `Y`. Only gram lookups, no kernel evaluations.
pub fn mmd_u_statistic_relabeled(gram: &GramBlocks, perm: &[usize]) -> Result<f64> {
    let (n, m) = (gram.n(), gram.m());
    check_u_sizes(n, m)?;
    if perm.len() != n + m {
        return Err(Error::DimensionMismatch {
            expected: n + m,
            got: perm.len(),
        });
    }
    if let Some(&bad) = perm.iter().find(|&&p| p >= n + m) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: n + m,
        });
    }
    Ok(relabeled_unchecked(gram, perm))
}

fn relabeled_unchecked(gram: &GramBlocks, perm: &[usize]) -> f64 {
    let n = gram.n();
    let (xs, ys) = perm.split_at(n);
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for &a in xs {
        let row = gram.row(a);
        xx += xs.iter().map(|&b| row[b]).sum::<f64>() - row[a];
        xy += ys.iter().map(|&b| row[b]).sum::<f64>();
    }
    for &a in ys {
        let row = gram.row(a);
        yy += ys.iter().map(|&b| row[b]).sum::<f64>() - row[a];
    }
    u_statistic_from_sums(xx, xy, yy, n, gram.m())
}

/// Number of permutations and the seed from which each one is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub permutations: usize,
    pub seed: u64,
}

impl PermutationPlan {
    pub fn new(permutations: usize, seed: u64) -> Result<Self> {
        if permutations == 0 {
            return Err(Error::InvalidInput("permutation count must be >= 1".into()));
        }
        Ok(Self { permutations, seed })
    }

    /// The `b`-th permutation of `0..size`: a Fisher–Yates shuffle driven by
    /// the ChaCha8 stream `(seed, mix_stream([b]))`.
    pub fn permutation(&self, b: usize, size: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..size).collect();
        let mut rng = RngState::derive(self.seed, &[b as u64]).rng();
        perm.shuffle(&mut rng);
        perm
    }
}

/// Statistics of the permuted relabellings, in permutation-index order.
pub fn permutation_distribution(gram: &GramBlocks, plan: &PermutationPlan) -> Result<Vec<f64>> {
    check_u_sizes(gram.n(), gram.m())?;
    let size = gram.size();
    Ok((0..plan.permutations)
        .into_par_iter()
        .map(|b| relabeled_unchecked(gram, &plan.permutation(b, size)))
        .collect())
}

/// Add-one permutation p-value `(1 + #{stat_b >= observed}) / (B + 1)`.
pub fn permutation_p_value(observed: f64, permuted: &[f64]) -> f64 {
    let exceed = permuted.iter().filter(|&&s| s >= observed).count();
    (1 + exceed) as f64 / (permuted.len() + 1) as f64
}

/// MMD permutation test on a precomputed gram matrix.
pub fn permutation_test(
    gram: &GramBlocks,
    alpha: f64,
    plan: &PermutationPlan,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    PermutationPlan::new(plan.permutations, plan.seed)?;
    let start = Instant::now();
    let observed = mmd_u_statistic(gram)?;
    let permuted = permutation_distribution(gram, plan)?;
    let p_value = permutation_p_value(observed, &permuted);
    Ok(TestResult {
        statistic: observed,
        estimate: observed,
        p_value: Some(p_value),
        threshold: None,
        reject: p_value <= alpha,
        meta: TestMeta {
            test: format!("mmd-perm:{}", plan.permutations),
            n: gram.n(),
            m: gram.m(),
            d: None,
            kernel: None,
            seed: Some(plan.seed),
            alpha,
            calibration: Calibration::Permutation,
            elapsed_ns: start.elapsed().as_nanos() as u64,
            note: None,
        },
    })
}

/// Gram assembly plus [`permutation_test`], timed end to end.
pub fn mmd_perm_test(
    x: &SampleMatrix,
    y: &SampleMatrix,
    spec: &KernelSpec,
    alpha: f64,
    plan: &PermutationPlan,
) -> Result<TestResult> {
    let start = Instant::now();
    let gram = gram_matrix(spec, x, y)?;
    let mut result = permutation_test(&gram, alpha, plan)?.with_context(x.d(), *spec);
    result.meta.elapsed_ns = start.elapsed().as_nanos() as u64;
    Ok(result)
}

fn check_paired(x: &SampleMatrix, y: &SampleMatrix) -> Result<()> {
    if x.n() != y.n() {
        return Err(Error::InvalidInput(format!(
            "paired test needs n == m, got n={}, m={}",
            x.n(),
            y.n()
        )));
    }
    if x.d() != y.d() {
        return Err(Error::DimensionMismatch {
            expected: x.d(),
            got: y.d(),
        });
    }
    Ok(())
}

/// Unbiased U-statistic on rows `start..start+len` of both samples.
fn block_u_statistic(
    x: &SampleMatrix,
    y: &SampleMatrix,
    spec: &KernelSpec,
    start: usize,
    len: usize,
) -> f64 {
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for a in start..start + len {
        for b in start..start + len {
            xy += spec.eval_unchecked(x.row(a), y.row(b));
        }
        for b in a + 1..start + len {
            xx += spec.eval_unchecked(x.row(a), x.row(b));
            yy += spec.eval_unchecked(y.row(a), y.row(b));
        }
    }
    u_statistic_from_sums(2.0 * xx, xy, 2.0 * yy, len, len)
}

/// Per-block U-statistics over `⌊n/b⌋` consecutive blocks of paired indices.
pub fn block_statistics(
    x: &SampleMatrix,
    y: &SampleMatrix,
    spec: &KernelSpec,
    b: usize,
) -> Result<Vec<f64>> {
    check_paired(x, y)?;
    let n = x.n();
    if b < 2 || b > n {
        return Err(Error::InvalidInput(format!(
            "block size must lie in [2, {n}], got {b}"
        )));
    }
    Ok((0..n / b)
        .map(|t| block_u_statistic(x, y, spec, t * b, b))
        .collect())
}

/// Block-MMD test.
///
/// With at least two blocks the block average is studentized by the
/// across-block standard error (divisor `blocks − 1`) and compared with
/// `z_{1−α}`. A single block (`b == n`) has no Gaussian null, so the full
/// U-statistic is calibrated by permutation with `fallback` instead.
pub fn block_mmd_test(
    x: &SampleMatrix,
    y: &SampleMatrix,
    spec: &KernelSpec,
    b: usize,
    alpha: f64,
    fallback: &PermutationPlan,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let start = Instant::now();
    let n = x.n();
    let blocks = block_statistics(x, y, spec, b)?;
    if blocks.len() < 2 {
        if b != n {
            return Err(Error::InvalidInput(format!(
                "block size {b} leaves fewer than two complete blocks of {n}; \
                 Gaussian calibration is invalid"
            )));
        }
        let mut result = mmd_perm_test(x, y, spec, alpha, fallback)?;
        result.meta.test = format!("block:{b}");
        result.meta.note = Some("single block: permutation calibration".into());
        result.meta.elapsed_ns = start.elapsed().as_nanos() as u64;
        return Ok(result);
    }
    let count = blocks.len();
    let average = mean(&blocks);
    let std_err = (sample_variance(&blocks) / count as f64).sqrt();
    let statistic = studentized_ratio(average, std_err);
    let threshold = normal_quantile(1.0 - alpha)?;
    Ok(TestResult {
        statistic,
        estimate: average,
        p_value: None,
        threshold: Some(threshold),
        reject: statistic >= threshold,
        meta: TestMeta {
            test: format!("block:{b}"),
            n,
            m: y.n(),
            d: Some(x.d()),
            kernel: Some(*spec),
            seed: None,
            alpha,
            calibration: Calibration::Gaussian,
            elapsed_ns: start.elapsed().as_nanos() as u64,
            note: Some(format!(
                "blocks={count}; unbiased per-block U-statistics; across-block variance divisor {}",
                count - 1
            )),
        },
    })
}

/// `h` over disjoint consecutive quadruples `(X_2t, X_2t+1, Y_2t, Y_2t+1)`.
pub fn linear_terms(x: &SampleMatrix, y: &SampleMatrix, spec: &KernelSpec) -> Result<Vec<f64>> {
    check_paired(x, y)?;
    if x.n() < 4 {
        return Err(Error::InvalidInput(format!(
            "linear MMD needs n >= 4, got {}",
            x.n()
        )));
    }
    Ok((0..x.n() / 2)
        .map(|t| {
            let (x1, x2) = (x.row(2 * t), x.row(2 * t + 1));
            let (y1, y2) = (y.row(2 * t), y.row(2 * t + 1));
            spec.eval_unchecked(x1, x2) - spec.eval_unchecked(x1, y2) - spec.eval_unchecked(y1, x2)
                + spec.eval_unchecked(y1, y2)
        })
        .collect())
}

/// Linear-time MMD test with Gaussian calibration.
pub fn linear_mmd_test(
    x: &SampleMatrix,
    y: &SampleMatrix,
    spec: &KernelSpec,
    alpha: f64,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let start = Instant::now();
    let terms = linear_terms(x, y, spec)?;
    let count = terms.len();
    let average = mean(&terms);
    let std_err = (sample_variance(&terms) / count as f64).sqrt();
    let statistic = studentized_ratio(average, std_err);
    let threshold = normal_quantile(1.0 - alpha)?;
    Ok(TestResult {
        statistic,
        estimate: average,
        p_value: None,
        threshold: Some(threshold),
        reject: statistic >= threshold,
        meta: TestMeta {
            test: "linear".into(),
            n: x.n(),
            m: y.n(),
            d: Some(x.d()),
            kernel: Some(*spec),
            seed: None,
            alpha,
            calibration: Calibration::Gaussian,
            elapsed_ns: start.elapsed().as_nanos() as u64,
            note: None,
        },
    })
}
