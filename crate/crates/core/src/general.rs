//! Cross U-statistics for a general degenerate two-sample kernel `h`.
//!
//! For first-split points `X₁ᵢ`, `Y₁ⱼ` the averaged kernel
//! `φ(X₁ᵢ, Y₁ⱼ) = (n₂m₂)⁻¹ Σ h(X₁ᵢ, X₂ᵢ′, Y₁ⱼ, Y₂ⱼ′)` is formed over the second
//! splits. The statistic is the grand mean `Ū` of the φ matrix, studentized
//! with the variances of its row and column means. With `h = h_mmd` this
//! reproduces [`crate::cross::studentize`] exactly; it costs
//! `O(n₁m₁n₂m₂)` evaluations of `h` and is meant as an oracle and extension
//! point rather than a fast path.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::cross::{check_first_splits, split_samples, CrossMmdResult, SplitPlan};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::sample::SampleMatrix;
use crate::stats::{mean, population_variance, studentized_ratio};

type KernelFn = dyn Fn(&[f64], &[f64], &[f64], &[f64]) -> f64 + Send + Sync;

/// A named four-argument kernel `h(x, x′, y, y′)`. Degeneracy under the null
/// is the caller's responsibility.
#[derive(Clone)]
pub struct DegenerateKernel {
    name: String,
    h: Arc<KernelFn>,
}

impl fmt::Debug for DegenerateKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DegenerateKernel")
            .field("name", &self.name)
            .finish()
    }
}

impl DegenerateKernel {
    pub fn new<F>(name: impl Into<String>, h: F) -> Self
    where
        F: Fn(&[f64], &[f64], &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            h: Arc::new(h),
        }
    }

    /// `k(x,x′) − k(x,y′) − k(y,x′) + k(y,y′)`.
    pub fn mmd(spec: KernelSpec) -> Self {
        Self::new(format!("mmd[{}]", spec.family()), move |x, x2, y, y2| {
            spec.eval_unchecked(x, x2) - spec.eval_unchecked(x, y2) - spec.eval_unchecked(y, x2)
                + spec.eval_unchecked(y, y2)
        })
    }

    /// `⟨x − y, x′ − y′⟩`, the kernel behind the difference of means.
    pub fn mean_difference() -> Self {
        Self::new("mean-difference", |x, x2, y, y2| {
            x.iter()
                .zip(x2)
                .zip(y.iter().zip(y2))
                .map(|((a, a2), (b, b2))| (a - b) * (a2 - b2))
                .sum()
        })
    }

    pub fn zero() -> Self {
        Self::new("zero", |_, _, _, _| 0.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &[f64], x2: &[f64], y: &[f64], y2: &[f64]) -> f64 {
        (self.h)(x, x2, y, y2)
    }
}

/// `values[i * m1 + j] = φ(X₁ᵢ, Y₁ⱼ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiMatrix {
    pub n1: usize,
    pub m1: usize,
    pub values: Vec<f64>,
}

impl PhiMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m1 + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m1..(i + 1) * self.m1]
    }

    pub fn row_means(&self) -> Vec<f64> {
        (0..self.n1).map(|i| mean(self.row(i))).collect()
    }

    pub fn col_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.m1];
        for i in 0..self.n1 {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        sums.iter().map(|s| s / self.n1 as f64).collect()
    }

    pub fn grand_mean(&self) -> f64 {
        mean(&self.values)
    }
}

pub fn phi_matrix(
    h: &DegenerateKernel,
    x1: &SampleMatrix,
    x2: &SampleMatrix,
    y1: &SampleMatrix,
    y2: &SampleMatrix,
) -> Result<PhiMatrix> {
    if [x1.n(), x2.n(), y1.n(), y2.n()].contains(&0) {
        return Err(Error::InvalidInput(
            "phi_matrix needs four nonempty splits".into(),
        ));
    }
    let d = x1.d();
    for s in [x2, y1, y2] {
        if s.d() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.d(),
            });
        }
    }
    let (n1, m1) = (x1.n(), y1.n());
    let norm = (x2.n() * y2.n()) as f64;
    let mut values = vec![0.0; n1 * m1];
    values.par_chunks_mut(m1).enumerate().for_each(|(i, row)| {
        let xi = x1.row(i);
        for (j, cell) in row.iter_mut().enumerate() {
            let yj = y1.row(j);
            let mut acc = 0.0;
            for xa in x2.rows() {
                for yb in y2.rows() {
                    acc += h.eval(xi, xa, yj, yb);
                }
            }
            *cell = acc / norm;
        }
    });
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData(format!(
            "kernel {} produced a non-finite phi value",
            h.name()
        )));
    }
    Ok(PhiMatrix { n1, m1, values })
}

/// `T = Ū/σ̂`. The returned `ux` and `uy` hold the φ row and column means.
pub fn general_cross_t(
    h: &DegenerateKernel,
    x: &SampleMatrix,
    y: &SampleMatrix,
    plan: &SplitPlan,
) -> Result<CrossMmdResult> {
    check_first_splits(plan)?;
    let (x1, x2, y1, y2) = split_samples(x, y, plan)?;
    let phi = phi_matrix(h, &x1, &x2, &y1, &y2)?;
    let rows = phi.row_means();
    let cols = phi.col_means();
    let xmmd2 = phi.grand_mean();
    let sigma_x2 = population_variance(&rows);
    let sigma_y2 = population_variance(&cols);
    let sigma = (sigma_x2 / plan.n1 as f64 + sigma_y2 / plan.m1 as f64).sqrt();
    Ok(CrossMmdResult {
        xmmd2,
        sigma_x2,
        sigma_y2,
        sigma,
        t: studentized_ratio(xmmd2, sigma),
        ux: rows,
        uy: cols,
        split: *plan,
    })
}
