//! Test outcomes shared by every calibrated test.

use serde::{Deserialize, Serialize};

use crate::kernels::KernelSpec;

/// How a test turns its statistic into a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calibration {
    /// `reject == (statistic >= threshold)` with a standard-normal threshold.
    Gaussian,
    /// `reject == (p_value <= alpha)` from a permutation distribution.
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMeta {
    pub test: String,
    pub n: usize,
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub alpha: f64,
    pub calibration: Calibration,
    pub elapsed_ns: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// The value compared against the threshold (studentized where applicable).
    #[serde(with = "extended_f64")]
    pub statistic: f64,
    /// The raw, unstudentized estimate behind `statistic`.
    #[serde(with = "extended_f64")]
    pub estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub reject: bool,
    pub meta: TestMeta,
}

impl TestResult {
    /// Fills in the data dimension and kernel once they are known.
    pub fn with_context(mut self, d: usize, kernel: KernelSpec) -> Self {
        self.meta.d = Some(d);
        self.meta.kernel = Some(kernel);
        self
    }
}

/// JSON has no infinities; non-finite values travel as `"inf"`, `"-inf"`, `"nan"`.
pub mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}
