//! Kernel evaluation, pooled gram matrices and the median bandwidth rule.
//!
//! Three families are supported:
//!
//! ```text
//! Gaussian    k(x, y) = exp(-s ‖x − y‖²)
//! Laplace     k(x, y) = exp(-s ‖x − y‖)
//! Polynomial  k(x, y) = (1 + s xᵀy)^r
//! ```
//!
//! The polynomial form `(1 + xᵀy / s)^r` is the same family with scale `1/s`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::sample::SampleMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Laplace,
    Polynomial,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplace => "laplace",
            KernelFamily::Polynomial => "polynomial",
        })
    }
}

/// A validated positive-definite kernel: family, scale and (polynomial only) degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec", into = "RawKernelSpec")]
pub struct KernelSpec {
    family: KernelFamily,
    scale: f64,
    degree: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct RawKernelSpec {
    family: KernelFamily,
    scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    degree: Option<u32>,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        KernelSpec::new(raw.family, raw.scale, raw.degree)
    }
}

impl From<KernelSpec> for RawKernelSpec {
    fn from(spec: KernelSpec) -> Self {
        RawKernelSpec {
            family: spec.family,
            scale: spec.scale,
            degree: spec.degree,
        }
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, scale: f64, degree: Option<u32>) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "kernel scale must be positive and finite, got {scale}"
            )));
        }
        match (family, degree) {
            (KernelFamily::Polynomial, Some(r)) if r >= 1 => {}
            (KernelFamily::Polynomial, Some(_)) => {
                return Err(Error::InvalidSpec("polynomial degree must be >= 1".into()))
            }
            (KernelFamily::Polynomial, None) => {
                return Err(Error::InvalidSpec(
                    "polynomial kernel needs a degree".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(Error::InvalidSpec(format!(
                    "{family} kernel takes no degree"
                )))
            }
            (_, None) => {}
        }
        Ok(Self {
            family,
            scale,
            degree,
        })
    }

    pub fn gaussian(scale: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, scale, None)
    }

    pub fn laplace(scale: f64) -> Result<Self> {
        Self::new(KernelFamily::Laplace, scale, None)
    }

    /// `(1 + scale · xᵀy)^degree`.
    pub fn polynomial(degree: u32, scale: f64) -> Result<Self> {
        Self::new(KernelFamily::Polynomial, scale, Some(degree))
    }

    /// `(1 + xᵀy / divisor)^degree`.
    pub fn polynomial_divided(degree: u32, divisor: f64) -> Result<Self> {
        if !(divisor.is_finite() && divisor > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "polynomial divisor must be positive and finite, got {divisor}"
            )));
        }
        Self::polynomial(degree, 1.0 / divisor)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn degree(&self) -> Option<u32> {
        self.degree
    }

    /// Same family and degree, different scale.
    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        Self::new(self.family, scale, self.degree)
    }

    /// Kernel value; callers guarantee `x.len() == y.len()`.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-self.scale * squared_distance(x, y)).exp(),
            KernelFamily::Laplace => (-self.scale * squared_distance(x, y).sqrt()).exp(),
            KernelFamily::Polynomial => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                let base = 1.0 + self.scale * dot;
                base.powi(self.degree.unwrap_or(2) as i32)
            }
        }
    }

    /// Kernel value as a function of the squared distance, for the radial families.
    #[inline]
    fn eval_radial(&self, sq_dist: f64) -> Option<f64> {
        match self.family {
            KernelFamily::Gaussian => Some((-self.scale * sq_dist).exp()),
            KernelFamily::Laplace => Some((-self.scale * sq_dist.sqrt()).exp()),
            KernelFamily::Polynomial => None,
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.degree {
            Some(r) => write!(f, "{}(degree={r}, scale={})", self.family, self.scale),
            None => write!(f, "{}(scale={})", self.family, self.scale),
        }
    }
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let diff = a - b;
            diff * diff
        })
        .sum()
}

/// Evaluates `k(x, y)`.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(spec.eval_unchecked(x, y))
}

/// Pooled `(n+m) × (n+m)` kernel matrix of `X` stacked over `Y`.
///
/// Pooled index `a < n` is `X[a]`; `a >= n` is `Y[a - n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBlocks {
    pooled: Vec<f64>,
    n: usize,
    m: usize,
}

impl GramBlocks {
    /// Wraps an existing symmetric pooled matrix (row-major).
    pub fn from_pooled(pooled: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        let size = n + m;
        if pooled.len() != size * size {
            return Err(Error::DimensionMismatch {
                expected: size * size,
                got: pooled.len(),
            });
        }
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput("both samples must be nonempty".into()));
        }
        for a in 0..size {
            for b in 0..a {
                if pooled[a * size + b] != pooled[b * size + a] {
                    return Err(Error::InvalidInput(format!(
                        "pooled matrix is not symmetric at ({a}, {b})"
                    )));
                }
            }
        }
        Ok(Self { pooled, n, m })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    /// `n + m`.
    #[inline]
    pub fn size(&self) -> usize {
        self.n + self.m
    }

    /// Pooled entry `k(z_a, z_b)`.
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.pooled[a * self.size() + b]
    }

    #[inline]
    pub fn row(&self, a: usize) -> &[f64] {
        let size = self.size();
        &self.pooled[a * size..(a + 1) * size]
    }

    /// `k(X_i, X_i')`.
    #[inline]
    pub fn xx(&self, i: usize, i2: usize) -> f64 {
        self.get(i, i2)
    }

    /// `k(X_i, Y_j)`.
    #[inline]
    pub fn xy(&self, i: usize, j: usize) -> f64 {
        self.get(i, self.n + j)
    }

    /// `k(Y_j, Y_j')`.
    #[inline]
    pub fn yy(&self, j: usize, j2: usize) -> f64 {
        self.get(self.n + j, self.n + j2)
    }

    pub fn pooled(&self) -> &[f64] {
        &self.pooled
    }

    /// Every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            pooled: self.pooled.iter().map(|v| v * c).collect(),
            n: self.n,
            m: self.m,
        }
    }
}

pub(crate) fn check_same_dim(x: &SampleMatrix, y: &SampleMatrix) -> Result<()> {
    if x.d() != y.d() {
        return Err(Error::DimensionMismatch {
            expected: x.d(),
            got: y.d(),
        });
    }
    Ok(())
}

/// Fills a symmetric `size × size` matrix, evaluating each unordered pair once.
fn fill_symmetric<F>(size: usize, entry: F) -> Vec<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let mut pooled = vec![0.0; size * size];
    pooled
        .par_chunks_mut(size.max(1))
        .enumerate()
        .for_each(|(a, row)| {
            for (b, slot) in row.iter_mut().enumerate().skip(a) {
                *slot = entry(a, b);
            }
        });
    for a in 1..size {
        for b in 0..a {
            pooled[a * size + b] = pooled[b * size + a];
        }
    }
    pooled
}

/// Assembles the pooled gram matrix of `X` over `Y`.
pub fn gram_matrix(spec: &KernelSpec, x: &SampleMatrix, y: &SampleMatrix) -> Result<GramBlocks> {
    check_same_dim(x, y)?;
    let pooled_sample = x.concat(y)?;
    let pooled = fill_symmetric(pooled_sample.n(), |a, b| {
        spec.eval_unchecked(pooled_sample.row(a), pooled_sample.row(b))
    });
    Ok(GramBlocks {
        pooled,
        n: x.n(),
        m: y.n(),
    })
}

/// Squared Euclidean distances over the pooled sample.
struct PooledDistances {
    sq: Vec<f64>,
    size: usize,
}

impl PooledDistances {
    fn new(pooled_sample: &SampleMatrix) -> Self {
        let size = pooled_sample.n();
        let sq = fill_symmetric(size, |a, b| {
            if a == b {
                0.0
            } else {
                squared_distance(pooled_sample.row(a), pooled_sample.row(b))
            }
        });
        Self { sq, size }
    }

    /// Strict upper triangle, i.e. one entry per unordered distinct-index pair.
    fn upper(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.size * self.size.saturating_sub(1) / 2);
        for a in 0..self.size {
            out.extend_from_slice(&self.sq[a * self.size + a + 1..(a + 1) * self.size]);
        }
        out
    }
}

/// Median of the distances, given their squares. Averages the two middle
/// order statistics for an even count.
fn median_from_squared(mut sq: Vec<f64>) -> f64 {
    let len = sq.len();
    let mid = len / 2;
    let (left, upper, _) = sq.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = upper.sqrt();
    if len % 2 == 1 {
        upper
    } else {
        let lower = left
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            .sqrt();
        0.5 * (lower + upper)
    }
}

fn scale_from_median(w: f64, family: KernelFamily) -> f64 {
    match family {
        KernelFamily::Gaussian => 1.0 / (2.0 * w * w),
        KernelFamily::Laplace | KernelFamily::Polynomial => 1.0 / w,
    }
}

fn median_of_pooled(distances: &PooledDistances) -> Result<f64> {
    if distances.size < 2 {
        return Err(Error::InvalidInput(
            "median heuristic needs at least two pooled points".into(),
        ));
    }
    let w = median_from_squared(distances.upper());
    if w > 0.0 {
        Ok(w)
    } else {
        Err(Error::DegenerateData(
            "median pairwise distance is zero".into(),
        ))
    }
}

/// Median pairwise distance `w` of the pooled sample over distinct-index pairs.
pub fn median_pairwise_distance(x: &SampleMatrix, y: &SampleMatrix) -> Result<f64> {
    check_same_dim(x, y)?;
    median_of_pooled(&PooledDistances::new(&x.concat(y)?))
}

/// Median-heuristic scale: `1/(2w²)` for Gaussian, `1/w` for Laplace and Polynomial.
pub fn median_bandwidth(x: &SampleMatrix, y: &SampleMatrix, family: KernelFamily) -> Result<f64> {
    Ok(scale_from_median(median_pairwise_distance(x, y)?, family))
}

/// Median-heuristic kernel together with its pooled gram matrix.
///
/// For the radial families the pairwise distances are computed once and
/// shared between the bandwidth rule and the gram assembly.
pub fn median_gram(
    x: &SampleMatrix,
    y: &SampleMatrix,
    family: KernelFamily,
    degree: Option<u32>,
) -> Result<(KernelSpec, GramBlocks)> {
    check_same_dim(x, y)?;
    let pooled_sample = x.concat(y)?;
    let distances = PooledDistances::new(&pooled_sample);
    let w = median_of_pooled(&distances)?;
    let spec = KernelSpec::new(family, scale_from_median(w, family), degree)?;
    let gram = match family {
        KernelFamily::Polynomial => gram_matrix(&spec, x, y)?,
        _ => {
            let mut pooled = distances.sq;
            for v in pooled.iter_mut() {
                *v = spec.eval_radial(*v).unwrap_or(f64::NAN);
            }
            GramBlocks {
                pooled,
                n: x.n(),
                m: y.n(),
            }
        }
    };
    Ok((spec, gram))
}
