//! Monte Carlo experiments for the xMMD test and its baselines: null
//! histograms, type-I error and power curves, ROC curves and timing, each
//! written as an aggregate CSV with a JSON provenance sidecar.

pub mod engine;
pub mod error;
pub mod experiments;
pub mod roc;
pub mod spec;
pub mod table;

pub use error::{HarnessError, Result};
pub use experiments::{
    run, run_bench, run_null_hist, run_power_curve, run_roc, with_pool, ExperimentOutput,
};
pub use spec::{BlockSize, ExperimentKind, ExperimentSpec, KernelChoice, TestId};
pub use table::{
    read_csv, write_sidecar, Metadata, RawSample, ResultRow, ResultTable, RocCurve, Sidecar,
};
