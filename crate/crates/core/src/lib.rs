//! Kernel two-sample testing with the cross-MMD statistic.
//!
//! The xMMD test splits each sample in two, pairs the halves through an
//! inner product of empirical kernel embeddings, and studentizes. The result
//! is calibrated against `N(0, 1)` with no permutations, in quadratic time.
//! Permutation, block and linear MMD baselines, a general degenerate-kernel
//! version of the statistic, seeded data sources and normal calibration
//! utilities live alongside it.

pub mod baselines;
pub mod calibration;
pub mod cross;
pub mod datagen;
pub mod error;
pub mod general;
pub mod kernels;
pub mod result;
pub mod sample;
mod stats;

pub use baselines::{
    block_mmd_test, linear_mmd_test, mmd_perm_test, mmd_u_statistic, permutation_test,
    PermutationPlan,
};
pub use calibration::{
    ks_distance, normal_cdf, normal_quantile, predict_perm_power, EmpiricalSample,
};
pub use cross::{
    cross_mmd_statistic, studentize, studentize_samples, xmmd_test, xmmd_test_gram, CrossMmdResult,
    SplitPlan,
};
pub use datagen::{RngState, SourceSpec, Which};
pub use error::{Error, Result};
pub use general::{general_cross_t, phi_matrix, DegenerateKernel, PhiMatrix};
pub use kernels::{
    eval_kernel, gram_matrix, median_bandwidth, GramBlocks, KernelFamily, KernelSpec,
};
pub use result::{Calibration, TestMeta, TestResult};
pub use sample::SampleMatrix;
pub use stats::studentized_ratio;
