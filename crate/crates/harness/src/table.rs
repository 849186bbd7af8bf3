//! Aggregate result tables, their CSV form and the JSON provenance sidecar.
//!
//! Every float is rounded to 9 significant digits when a row enters a table,
//! so writing and re-reading a table reproduces it exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use xmmd_core::datagen::RNG_ALGORITHM;

use crate::error::Result;
use crate::spec::{ExperimentKind, ExperimentSpec, TestId};

/// Rounds to 9 significant digits; non-finite values pass through.
pub fn sig9(v: f64) -> f64 {
    if v.is_finite() {
        format!("{v:.8e}").parse().expect("formatted float parses")
    } else {
        v
    }
}

fn sig9_opt(v: Option<f64>) -> Option<f64> {
    v.map(sig9)
}

/// One aggregate over the trials of a `(kind, test, n, m)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub kind: ExperimentKind,
    pub test: String,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub trials: usize,
    pub seed: u64,
    pub reject_rate: Option<f64>,
    /// One bootstrap standard deviation of `reject_rate`.
    pub power_sd: Option<f64>,
    /// Permutation-test power predicted from `reject_rate` (xmmd rows only).
    pub predicted_power: Option<f64>,
    /// Mean and standard deviation over the finite statistics.
    pub mean_statistic: Option<f64>,
    pub sd_statistic: Option<f64>,
    pub ks_distance: Option<f64>,
    pub pos_inf: Option<usize>,
    pub neg_inf: Option<usize>,
    pub auc: Option<f64>,
    pub time_median_ns: Option<f64>,
    pub time_iqr_ns: Option<f64>,
}

impl ResultRow {
    pub fn new(
        kind: ExperimentKind,
        test: TestId,
        n: usize,
        m: usize,
        d: usize,
        trials: usize,
        seed: u64,
    ) -> Self {
        Self {
            kind,
            test: test.to_string(),
            n,
            m,
            d,
            trials,
            seed,
            reject_rate: None,
            power_sd: None,
            predicted_power: None,
            mean_statistic: None,
            sd_statistic: None,
            ks_distance: None,
            pos_inf: None,
            neg_inf: None,
            auc: None,
            time_median_ns: None,
            time_iqr_ns: None,
        }
    }

    fn quantized(mut self) -> Self {
        for v in [
            &mut self.reject_rate,
            &mut self.power_sd,
            &mut self.predicted_power,
            &mut self.mean_statistic,
            &mut self.sd_statistic,
            &mut self.ks_distance,
            &mut self.auc,
            &mut self.time_median_ns,
            &mut self.time_iqr_ns,
        ] {
            *v = sig9_opt(*v);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub rng_algorithm: String,
    pub version: String,
}

impl Metadata {
    pub fn for_seed(seed: u64) -> Self {
        Self {
            seed,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    rows: Vec<ResultRow>,
    pub metadata: Metadata,
}

impl ResultTable {
    pub fn new(metadata: Metadata) -> Self {
        Self {
            rows: Vec::new(),
            metadata,
        }
    }

    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row.quantized());
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    /// The row for `(test, n, m)`, if present.
    pub fn find(&self, test: TestId, n: usize, m: usize) -> Option<&ResultRow> {
        let name = test.to_string();
        self.rows
            .iter()
            .find(|r| r.test == name && r.n == n && r.m == m)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(CSV_COLUMNS)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Column order of the aggregate CSV.
pub const CSV_COLUMNS: [&str; 18] = [
    "kind",
    "test",
    "n",
    "m",
    "d",
    "trials",
    "seed",
    "reject_rate",
    "power_sd",
    "predicted_power",
    "mean_statistic",
    "sd_statistic",
    "ks_distance",
    "pos_inf",
    "neg_inf",
    "auc",
    "time_median_ns",
    "time_iqr_ns",
];

/// Reads rows written by [`ResultTable::write_csv`].
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

/// Provenance record written next to every CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub spec: ExperimentSpec,
    pub metadata: Metadata,
}

pub fn write_sidecar<W: Write>(
    writer: W,
    spec: &ExperimentSpec,
    metadata: &Metadata,
) -> Result<()> {
    let sidecar = Sidecar {
        spec: spec.clone(),
        metadata: metadata.clone(),
    };
    serde_json::to_writer_pretty(writer, &sidecar)?;
    Ok(())
}

/// Statistics of one test across trials, for histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub test: TestId,
    pub n: usize,
    pub m: usize,
    pub values: Vec<f64>,
}

/// Single-column CSV with header `statistic`.
pub fn write_raw_csv<W: Write>(writer: W, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["statistic"])?;
    for v in values {
        w.serialize([sig9(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(reader);
    let values = r
        .deserialize()
        .collect::<std::result::Result<Vec<(f64,)>, _>>()?;
    Ok(values.into_iter().map(|(v,)| v).collect())
}

/// Step ROC curve of one statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub test: TestId,
    pub n: usize,
    pub m: usize,
    /// `(FPR, TPR)` points from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

#[derive(Serialize)]
struct RocPoint<'a> {
    test: &'a str,
    n: usize,
    m: usize,
    fpr: f64,
    tpr: f64,
}

/// Long-format CSV `test,n,m,fpr,tpr` of all curves.
pub fn write_roc_csv<W: Write>(writer: W, curves: &[RocCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for curve in curves {
        let test = curve.test.to_string();
        for &(fpr, tpr) in &curve.points {
            w.serialize(RocPoint {
                test: &test,
                n: curve.n,
                m: curve.m,
                fpr: sig9(fpr),
                tpr: sig9(tpr),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
