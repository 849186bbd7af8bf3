//! The experiment runners.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use xmmd_core::calibration::{ks_distance, predict_perm_power, EmpiricalSample};
use xmmd_core::{RngState, SourceSpec};

use crate::engine::{draw, prepare, run_test, statistic_only, TrialKey};
use crate::error::{invalid, Result};
use crate::roc::roc_curve;
use crate::spec::{ExperimentKind, ExperimentSpec, TestId};
use crate::table::{Metadata, RawSample, ResultRow, ResultTable, RocCurve};

/// Stream tag of the bootstrap resampler, kept apart from trial streams.
const BOOTSTRAP_ARM: u64 = 0xB007;
const NULL_ARM: u64 = 0;
const ALT_ARM: u64 = 1;

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub raw: Vec<RawSample>,
    pub roc: Vec<RocCurve>,
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| invalid(format!("threads: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Dispatches on `spec.kind`.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let empty = |table| ExperimentOutput {
        table,
        raw: Vec::new(),
        roc: Vec::new(),
    };
    match spec.kind {
        ExperimentKind::NullHist => {
            let (table, raw) = run_null_hist(spec)?;
            Ok(ExperimentOutput {
                table,
                raw,
                roc: Vec::new(),
            })
        }
        ExperimentKind::TypeIError | ExperimentKind::PowerCurve => {
            Ok(empty(run_power_curve(spec)?))
        }
        ExperimentKind::Roc => {
            let (table, roc) = run_roc(spec)?;
            Ok(ExperimentOutput {
                table,
                raw: Vec::new(),
                roc,
            })
        }
        ExperimentKind::Bench => Ok(empty(run_bench(spec)?)),
    }
}

/// Per-test `(statistic, reject)` for every trial at one size.
fn calibrated_trials(spec: &ExperimentSpec, size_index: usize) -> Result<Vec<Vec<(f64, bool)>>> {
    let (n, m) = spec.sizes[size_index];
    (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let key = TrialKey {
                seed: spec.seed,
                size_index,
                trial,
                arm: ALT_ARM,
            };
            let (x, y) = draw(&spec.source, n, m, key)?;
            let prepared = prepare(&spec.kernel, &spec.tests, &x, &y)?;
            spec.tests
                .iter()
                .map(|&test| {
                    let r = run_test(test, &x, &y, &prepared, spec.alpha, key)?;
                    Ok((r.statistic, r.reject))
                })
                .collect()
        })
        .collect()
}

fn column<T: Copy>(per_trial: &[Vec<T>], test_index: usize) -> Vec<T> {
    per_trial.iter().map(|row| row[test_index]).collect()
}

fn reject_rate(rejects: &[bool]) -> f64 {
    rejects.iter().filter(|&&r| r).count() as f64 / rejects.len() as f64
}

/// Standard deviation of the rejection rate over bootstrap resamples of trials.
pub fn bootstrap_sd(rejects: &[bool], resamples: usize, rng: RngState) -> f64 {
    let mut gen = rng.rng();
    let len = rejects.len();
    let rates: Vec<f64> = (0..resamples)
        .map(|_| {
            (0..len)
                .filter(|_| rejects[gen.random_range(0..len)])
                .count() as f64
                / len as f64
        })
        .collect();
    if rates.len() < 2 {
        return 0.0;
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rates.len() - 1) as f64).sqrt()
}

/// `(mean, sd)` over the finite values.
fn finite_moments(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    match finite.len() {
        0 => (None, None),
        1 => (Some(finite[0]), None),
        len => {
            let mean = finite.iter().sum::<f64>() / len as f64;
            let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (len - 1) as f64;
            (Some(mean), Some(var.sqrt()))
        }
    }
}

/// Predicted permutation power, extended by its limits at rates 0 and 1.
pub fn predicted_power(rate: f64, alpha: f64) -> Result<f64> {
    Ok(if rate <= 0.0 {
        0.0
    } else if rate >= 1.0 {
        1.0
    } else {
        predict_perm_power(rate, alpha)?
    })
}

fn base_row(spec: &ExperimentSpec, test: TestId, size_index: usize) -> ResultRow {
    let (n, m) = spec.sizes[size_index];
    ResultRow::new(
        spec.kind,
        test,
        n,
        m,
        spec.source.d(),
        spec.trials,
        spec.seed,
    )
}

/// Null distribution study: raw statistics, KS distance to `Φ`, and counts of `±∞`.
pub fn run_null_hist(spec: &ExperimentSpec) -> Result<(ResultTable, Vec<RawSample>)> {
    if spec.kind != ExperimentKind::NullHist {
        return Err(invalid(format!(
            "kind: run_null_hist needs null_hist, got {}",
            spec.kind
        )));
    }
    spec.validate()?;
    with_pool(spec.threads, || {
        let mut table = ResultTable::new(Metadata::for_seed(spec.seed));
        let mut raw = Vec::new();
        for size_index in 0..spec.sizes.len() {
            let per_trial = calibrated_trials(spec, size_index)?;
            for (ti, &test) in spec.tests.iter().enumerate() {
                let column = column(&per_trial, ti);
                let stats: Vec<f64> = column.iter().map(|c| c.0).collect();
                let rejects: Vec<bool> = column.iter().map(|c| c.1).collect();
                let empirical = EmpiricalSample::new(&stats)?;
                let mut row = base_row(spec, test, size_index);
                (row.mean_statistic, row.sd_statistic) = finite_moments(&stats);
                row.ks_distance = if empirical.count() > 0 {
                    Some(ks_distance(&empirical)?)
                } else {
                    None
                };
                row.pos_inf = Some(empirical.pos_inf());
                row.neg_inf = Some(empirical.neg_inf());
                row.reject_rate = Some(reject_rate(&rejects));
                table.push(row);
                let (n, m) = spec.sizes[size_index];
                raw.push(RawSample {
                    test,
                    n,
                    m,
                    values: stats,
                });
            }
        }
        Ok((table, raw))
    })?
}

/// Rejection rates (power, or type-I error for null sources) with bootstrap
/// bands and, for xmmd, the predicted permutation-test power.
pub fn run_power_curve(spec: &ExperimentSpec) -> Result<ResultTable> {
    if !matches!(
        spec.kind,
        ExperimentKind::PowerCurve | ExperimentKind::TypeIError
    ) {
        return Err(invalid(format!(
            "kind: run_power_curve needs power_curve or type_i_error, got {}",
            spec.kind
        )));
    }
    spec.validate()?;
    with_pool(spec.threads, || {
        let mut table = ResultTable::new(Metadata::for_seed(spec.seed));
        for size_index in 0..spec.sizes.len() {
            let per_trial = calibrated_trials(spec, size_index)?;
            for (ti, &test) in spec.tests.iter().enumerate() {
                let column = column(&per_trial, ti);
                let stats: Vec<f64> = column.iter().map(|c| c.0).collect();
                let rejects: Vec<bool> = column.iter().map(|c| c.1).collect();
                let rate = reject_rate(&rejects);
                let mut row = base_row(spec, test, size_index);
                row.reject_rate = Some(rate);
                let boot =
                    RngState::derive(spec.seed, &[BOOTSTRAP_ARM, size_index as u64, ti as u64]);
                row.power_sd = Some(bootstrap_sd(&rejects, spec.bootstrap, boot));
                (row.mean_statistic, row.sd_statistic) = finite_moments(&stats);
                if test == TestId::Xmmd {
                    row.predicted_power = Some(predicted_power(rate, spec.alpha)?);
                }
                table.push(row);
            }
        }
        Ok(table)
    })?
}

fn arm_statistics(
    spec: &ExperimentSpec,
    source: &SourceSpec,
    size_index: usize,
    arm: u64,
) -> Result<Vec<Vec<f64>>> {
    let (n, m) = spec.sizes[size_index];
    (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let key = TrialKey {
                seed: spec.seed,
                size_index,
                trial,
                arm,
            };
            let (x, y) = draw(source, n, m, key)?;
            let prepared = prepare(&spec.kernel, &spec.tests, &x, &y)?;
            spec.tests
                .iter()
                .map(|&test| statistic_only(test, &x, &y, &prepared, key))
                .collect()
        })
        .collect()
}

/// ROC curves and AUCs from `trials` null and `trials` alternative draws.
pub fn run_roc(spec: &ExperimentSpec) -> Result<(ResultTable, Vec<RocCurve>)> {
    if spec.kind != ExperimentKind::Roc {
        return Err(invalid(format!(
            "kind: run_roc needs roc, got {}",
            spec.kind
        )));
    }
    spec.validate()?;
    if spec.source.is_null() {
        return Err(invalid("source: roc needs an alternative source (eps > 0)"));
    }
    let null_source = spec.source.null_version();
    with_pool(spec.threads, || {
        let mut table = ResultTable::new(Metadata::for_seed(spec.seed));
        let mut curves = Vec::new();
        for size_index in 0..spec.sizes.len() {
            let null = arm_statistics(spec, &null_source, size_index, NULL_ARM)?;
            let alt = arm_statistics(spec, &spec.source, size_index, ALT_ARM)?;
            for (ti, &test) in spec.tests.iter().enumerate() {
                let (points, auc) = roc_curve(&column(&null, ti), &column(&alt, ti));
                let mut row = base_row(spec, test, size_index);
                row.auc = Some(auc);
                table.push(row);
                let (n, m) = spec.sizes[size_index];
                curves.push(RocCurve {
                    test,
                    n,
                    m,
                    points,
                    auc,
                });
            }
        }
        Ok((table, curves))
    })?
}

/// `q`-quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Wall-clock cost of each test, from kernel selection to decision, paired
/// with its power. Runs on one worker unless `spec.threads` says otherwise;
/// data generation is outside the timed region and each cell is warmed once.
pub fn run_bench(spec: &ExperimentSpec) -> Result<ResultTable> {
    if spec.kind != ExperimentKind::Bench {
        return Err(invalid(format!(
            "kind: run_bench needs bench, got {}",
            spec.kind
        )));
    }
    spec.validate()?;
    with_pool(Some(spec.threads.unwrap_or(1)), || {
        let mut table = ResultTable::new(Metadata::for_seed(spec.seed));
        for (size_index, &(n, m)) in spec.sizes.iter().enumerate() {
            for &test in &spec.tests {
                let one = [test];
                let timed = |trial: usize| -> Result<(f64, bool)> {
                    let key = TrialKey {
                        seed: spec.seed,
                        size_index,
                        trial,
                        arm: ALT_ARM,
                    };
                    let (x, y) = draw(&spec.source, n, m, key)?;
                    let start = Instant::now();
                    let prepared = prepare(&spec.kernel, &one, &x, &y)?;
                    let result = run_test(test, &x, &y, &prepared, spec.alpha, key)?;
                    Ok((start.elapsed().as_nanos() as f64, result.reject))
                };
                timed(0)?;
                let runs = (0..spec.trials).map(timed).collect::<Result<Vec<_>>>()?;
                let mut times: Vec<f64> = runs.iter().map(|r| r.0).collect();
                times.sort_by(f64::total_cmp);
                let rejects: Vec<bool> = runs.iter().map(|r| r.1).collect();
                let mut row = base_row(spec, test, size_index);
                row.reject_rate = Some(reject_rate(&rejects));
                row.time_median_ns = Some(quantile(&times, 0.5));
                row.time_iqr_ns = Some(quantile(&times, 0.75) - quantile(&times, 0.25));
                table.push(row);
            }
        }
        Ok(table)
    })?
}
