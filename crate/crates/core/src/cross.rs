//! The cross-MMD statistic and the permutation-free xMMD test.
//!
//! Split `X` into `X₁, X₂` and `Y` into `Y₁, Y₂` and form the empirical
//! embeddings `μ̂₁, μ̂₂, ν̂₁, ν̂₂`. The cross statistic is
//!
//! ```text
//! xMMD² = ⟨μ̂₁ − ν̂₁, μ̂₂ − ν̂₂⟩ = mean(U_X) − mean(U_Y),
//! U_{X,i} = ⟨k(X_i, ·), μ̂₂ − ν̂₂⟩,   U_{Y,j} = ⟨k(Y_j, ·), μ̂₂ − ν̂₂⟩,
//! ```
//!
//! and it is studentized by `σ̂² = σ̂_X²/n₁ + σ̂_Y²/m₁`, where `σ̂_X²` and
//! `σ̂_Y²` are the (divisor `n₁`, `m₁`) variances of the `U` values. Under
//! the null the studentized value is asymptotically `N(0, 1)`, so the test
//! rejects when it exceeds `z_{1−α}`. Everything is read off the pooled gram
//! matrix, or computed from the samples directly, in `O((n+m)²)`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::normal_quantile;
use crate::datagen::RngState;
use crate::error::{check_alpha, Error, Result};
use crate::kernels::{check_same_dim, GramBlocks, KernelSpec};
use crate::result::{Calibration, TestMeta, TestResult};
use crate::sample::SampleMatrix;
use crate::stats::{mean, population_variance, studentized_ratio};

/// Sizes of the two splits of each sample, with an optional seeded pre-shuffle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n1: usize,
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffle_seed: Option<u64>,
}

/// Row indices (into `X` and `Y` respectively) of the four splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub x1: Vec<usize>,
    pub x2: Vec<usize>,
    pub y1: Vec<usize>,
    pub y2: Vec<usize>,
}

impl SplitPlan {
    /// `n₁ = ⌊n/2⌋`, `m₁ = ⌊m/2⌋`; an odd extra point goes to the second split.
    pub fn balanced(n: usize, m: usize) -> Result<Self> {
        Self::new(n / 2, n - n / 2, m / 2, m - m / 2)
    }

    pub fn new(n1: usize, n2: usize, m1: usize, m2: usize) -> Result<Self> {
        let plan = Self {
            n1,
            n2,
            m1,
            m2,
            shuffle_seed: None,
        };
        if [n1, n2, m1, m2].contains(&0) {
            return Err(Error::InvalidInput(format!(
                "every split must be nonempty, got n1={n1}, n2={n2}, m1={m1}, m2={m2}"
            )));
        }
        Ok(plan)
    }

    pub fn with_shuffle(mut self, seed: u64) -> Self {
        self.shuffle_seed = Some(seed);
        self
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn m(&self) -> usize {
        self.m1 + self.m2
    }

    /// Checks the plan against sample sizes `n` and `m`.
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        Self::new(self.n1, self.n2, self.m1, self.m2)?;
        if self.n() != n || self.m() != m {
            return Err(Error::InvalidInput(format!(
                "split plan covers n={}, m={} but data has n={n}, m={m}",
                self.n(),
                self.m()
            )));
        }
        Ok(())
    }

    /// Row order is the identity unless a shuffle seed is set, in which case
    /// `X` and `Y` are each shuffled by their own derived stream.
    pub fn indices(&self) -> SplitIndices {
        let mut xs: Vec<usize> = (0..self.n()).collect();
        let mut ys: Vec<usize> = (0..self.m()).collect();
        if let Some(seed) = self.shuffle_seed {
            xs.shuffle(&mut RngState::derive(seed, &[0]).rng());
            ys.shuffle(&mut RngState::derive(seed, &[1]).rng());
        }
        let y2 = ys.split_off(self.m1);
        let x2 = xs.split_off(self.n1);
        SplitIndices {
            x1: xs,
            x2,
            y1: ys,
            y2,
        }
    }
}

/// Partitions the samples into `(X₁, X₂, Y₁, Y₂)` according to `plan`.
pub fn split_samples(
    x: &SampleMatrix,
    y: &SampleMatrix,
    plan: &SplitPlan,
) -> Result<(SampleMatrix, SampleMatrix, SampleMatrix, SampleMatrix)> {
    plan.validate(x.n(), y.n())?;
    let idx = plan.indices();
    Ok((
        x.select(&idx.x1)?,
        x.select(&idx.x2)?,
        y.select(&idx.y1)?,
        y.select(&idx.y2)?,
    ))
}

/// The cross statistic with its studentization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMmdResult {
    pub xmmd2: f64,
    pub sigma_x2: f64,
    pub sigma_y2: f64,
    pub sigma: f64,
    /// `xmmd2 / sigma`, or the signed-infinity value when `sigma == 0`.
    #[serde(with = "crate::result::extended_f64")]
    pub t: f64,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub split: SplitPlan,
}

/// Pooled gram indices of the four splits.
struct PooledSplits {
    x1: Vec<usize>,
    x2: Vec<usize>,
    y1: Vec<usize>,
    y2: Vec<usize>,
}

impl PooledSplits {
    fn new(gram: &GramBlocks, plan: &SplitPlan) -> Result<Self> {
        plan.validate(gram.n(), gram.m())?;
        let idx = plan.indices();
        let n = gram.n();
        Ok(Self {
            x1: idx.x1,
            x2: idx.x2,
            y1: idx.y1.into_iter().map(|j| n + j).collect(),
            y2: idx.y2.into_iter().map(|j| n + j).collect(),
        })
    }
}

#[inline]
fn gathered_mean(row: &[f64], cols: &[usize]) -> f64 {
    cols.iter().map(|&c| row[c]).sum::<f64>() / cols.len() as f64
}

fn block_mean(gram: &GramBlocks, rows: &[usize], cols: &[usize]) -> f64 {
    rows.iter()
        .map(|&a| gathered_mean(gram.row(a), cols))
        .sum::<f64>()
        / rows.len() as f64
}

/// `⟨μ̂₁, μ̂₂⟩ + ⟨ν̂₁, ν̂₂⟩ − ⟨μ̂₁, ν̂₂⟩ − ⟨ν̂₁, μ̂₂⟩` from gram block averages.
pub fn cross_mmd_statistic(gram: &GramBlocks, plan: &SplitPlan) -> Result<f64> {
    let s = PooledSplits::new(gram, plan)?;
    Ok(
        block_mean(gram, &s.x1, &s.x2) + block_mean(gram, &s.y1, &s.y2)
            - block_mean(gram, &s.x1, &s.y2)
            - block_mean(gram, &s.y1, &s.x2),
    )
}

/// `U` values of the first-split points against `μ̂₂ − ν̂₂`.
fn witness_values(gram: &GramBlocks, rows: &[usize], x2: &[usize], y2: &[usize]) -> Vec<f64> {
    rows.iter()
        .map(|&a| {
            let row = gram.row(a);
            gathered_mean(row, x2) - gathered_mean(row, y2)
        })
        .collect()
}

/// Assembles the studentized result from the first-split `U` values.
pub(crate) fn studentize_values(ux: Vec<f64>, uy: Vec<f64>, split: SplitPlan) -> CrossMmdResult {
    let xmmd2 = mean(&ux) - mean(&uy);
    let sigma_x2 = population_variance(&ux);
    let sigma_y2 = population_variance(&uy);
    let sigma = (sigma_x2 / ux.len() as f64 + sigma_y2 / uy.len() as f64).sqrt();
    CrossMmdResult {
        xmmd2,
        sigma_x2,
        sigma_y2,
        sigma,
        t: studentized_ratio(xmmd2, sigma),
        ux,
        uy,
        split,
    }
}

pub(crate) fn check_first_splits(plan: &SplitPlan) -> Result<()> {
    if plan.n1 < 2 || plan.m1 < 2 {
        return Err(Error::InvalidInput(format!(
            "studentization needs n1 >= 2 and m1 >= 2, got n1={}, m1={}",
            plan.n1, plan.m1
        )));
    }
    Ok(())
}

/// Cross statistic, its variance terms and the studentized value `t`.
pub fn studentize(gram: &GramBlocks, plan: &SplitPlan) -> Result<CrossMmdResult> {
    check_first_splits(plan)?;
    let s = PooledSplits::new(gram, plan)?;
    let ux = witness_values(gram, &s.x1, &s.x2, &s.y2);
    let uy = witness_values(gram, &s.y1, &s.x2, &s.y2);
    Ok(studentize_values(ux, uy, *plan))
}

/// Witness values computed straight from the samples. Only the
/// `(n₁ + m₁) × (n₂ + m₂)` kernel values between first and second splits are
/// evaluated, so no pooled gram matrix is formed.
pub fn studentize_samples(
    x: &SampleMatrix,
    y: &SampleMatrix,
    spec: &KernelSpec,
    plan: &SplitPlan,
) -> Result<CrossMmdResult> {
    check_first_splits(plan)?;
    check_same_dim(x, y)?;
    let (x1, x2, y1, y2) = split_samples(x, y, plan)?;
    let witness = |a: &[f64]| {
        let kx = x2.rows().map(|b| spec.eval_unchecked(a, b)).sum::<f64>() / x2.n() as f64;
        let ky = y2.rows().map(|b| spec.eval_unchecked(a, b)).sum::<f64>() / y2.n() as f64;
        kx - ky
    };
    let values = |s: &SampleMatrix| -> Vec<f64> {
        (0..s.n())
            .into_par_iter()
            .map(|i| witness(s.row(i)))
            .collect()
    };
    let (ux, uy) = (values(&x1), values(&y1));
    if ux.iter().chain(&uy).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData(
            "kernel produced a non-finite value".into(),
        ));
    }
    Ok(studentize_values(ux, uy, *plan))
}

fn xmmd_result(
    res: &CrossMmdResult,
    alpha: f64,
    n: usize,
    m: usize,
    plan: &SplitPlan,
) -> Result<TestResult> {
    let threshold = normal_quantile(1.0 - alpha)?;
    Ok(TestResult {
        statistic: res.t,
        estimate: res.xmmd2,
        p_value: None,
        threshold: Some(threshold),
        reject: res.t >= threshold,
        meta: TestMeta {
            test: "xmmd".into(),
            n,
            m,
            d: None,
            kernel: None,
            seed: plan.shuffle_seed,
            alpha,
            calibration: Calibration::Gaussian,
            elapsed_ns: 0,
            note: Some(format!("split n1={}, m1={}", plan.n1, plan.m1)),
        },
    })
}

/// xMMD test on a precomputed gram matrix: reject iff `t >= z_{1−α}`.
pub fn xmmd_test_gram(gram: &GramBlocks, alpha: f64, plan: &SplitPlan) -> Result<TestResult> {
    check_alpha(alpha)?;
    let start = Instant::now();
    let res = studentize(gram, plan)?;
    let mut result = xmmd_result(&res, alpha, gram.n(), gram.m(), plan)?;
    result.meta.elapsed_ns = start.elapsed().as_nanos() as u64;
    Ok(result)
}

/// The xMMD test from raw samples via [`studentize_samples`], timed end to end.
pub fn xmmd_test(
    x: &SampleMatrix,
    y: &SampleMatrix,
    spec: &KernelSpec,
    alpha: f64,
    plan: &SplitPlan,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let start = Instant::now();
    let res = studentize_samples(x, y, spec, plan)?;
    let mut result = xmmd_result(&res, alpha, x.n(), y.n(), plan)?.with_context(x.d(), *spec);
    result.meta.elapsed_ns = start.elapsed().as_nanos() as u64;
    Ok(result)
}
