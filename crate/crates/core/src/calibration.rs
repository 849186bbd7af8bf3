//! Standard-normal utilities and empirical-distribution diagnostics.
//!
//! `normal_cdf` uses Hart's double-precision rational approximation (as
//! popularised by West, "Better approximations to cumulative normal
//! functions"), with absolute error well below 1e-14 over the real line.
//! `normal_quantile` starts from Acklam's rational approximation and polishes
//! it with Halley steps against `normal_cdf`, falling back to bisection if a
//! step ever leaves the bracket.

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Lower tail `Φ(-|x|)`.
fn lower_tail(abs_x: f64) -> f64 {
    if abs_x > 37.0 {
        return 0.0;
    }
    let exponential = (-0.5 * abs_x * abs_x).exp();
    if abs_x < 7.071_067_811_865_47 {
        let mut num = 3.526_249_659_989_11e-2 * abs_x + 0.700_383_064_443_688;
        num = num * abs_x + 6.373_962_203_531_65;
        num = num * abs_x + 33.912_866_078_383;
        num = num * abs_x + 112.079_291_497_871;
        num = num * abs_x + 221.213_596_169_931;
        num = num * abs_x + 220.206_867_912_376;
        let mut den = 8.838_834_764_831_84e-2 * abs_x + 1.755_667_163_182_64;
        den = den * abs_x + 16.064_177_579_207;
        den = den * abs_x + 86.780_732_202_946_1;
        den = den * abs_x + 296.564_248_779_674;
        den = den * abs_x + 637.333_633_378_831;
        den = den * abs_x + 793.826_512_519_948;
        den = den * abs_x + 440.413_735_824_752;
        exponential * num / den
    } else {
        let mut cf = abs_x + 0.65;
        cf = abs_x + 4.0 / cf;
        cf = abs_x + 3.0 / cf;
        cf = abs_x + 2.0 / cf;
        cf = abs_x + 1.0 / cf;
        exponential / cf * INV_SQRT_2PI
    }
}

/// Standard normal CDF `Φ(x)`; `Φ(-∞) = 0`, `Φ(+∞) = 1`.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let tail = lower_tail(x.abs());
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// Standard normal quantile `Φ⁻¹(p)` for `p ∈ (0, 1)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "quantile level must lie in (0, 1), got {p}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work in the lower tail, where Φ is computed without cancellation.
    let upper = p > 0.5;
    let q = if upper { 1.0 - p } else { p };
    let mut z = acklam(q);
    let (mut lo, mut hi) = (-40.0_f64, 0.0_f64);
    for _ in 0..200 {
        let err = normal_cdf(z) - q;
        if err > 0.0 {
            hi = hi.min(z);
        } else {
            lo = lo.max(z);
        }
        let density = normal_pdf(z);
        if err == 0.0 || density == 0.0 {
            break;
        }
        let u = err / density;
        let next = z - u / (1.0 + 0.5 * z * u);
        if (next - z).abs() <= 1e-15 * z.abs().max(1.0) {
            z = next;
            break;
        }
        z = if next >= lo && next <= hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(if upper { -z } else { z })
}

/// Sorted finite sample with separate counts of infinite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    pos_inf: usize,
    neg_inf: usize,
}

impl EmpiricalSample {
    /// Sorts the finite values; `±∞` entries are counted, not stored.
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("empirical sample contains NaN".into()));
        }
        let pos_inf = values.iter().filter(|v| **v == f64::INFINITY).count();
        let neg_inf = values.iter().filter(|v| **v == f64::NEG_INFINITY).count();
        let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        finite.sort_by(f64::total_cmp);
        Ok(Self {
            values: finite,
            pos_inf,
            neg_inf,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn pos_inf(&self) -> usize {
        self.pos_inf
    }

    pub fn neg_inf(&self) -> usize {
        self.neg_inf
    }
}

/// Kolmogorov–Smirnov distance between the finite part of `sample` and `Φ`.
pub fn ks_distance(sample: &EmpiricalSample) -> Result<f64> {
    let n = sample.count();
    if n == 0 {
        return Err(Error::InvalidInput(
            "KS distance needs at least one finite value".into(),
        ));
    }
    let nf = n as f64;
    let d = sample
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let cdf = normal_cdf(v);
            let above = ((i + 1) as f64 / nf - cdf).abs();
            let below = (i as f64 / nf - cdf).abs();
            above.max(below)
        })
        .fold(0.0, f64::max);
    Ok(d)
}

/// Predicted permutation-test power from the cross-MMD test power:
/// `Φ(z_α + √2 (Φ⁻¹(ρ) − z_α))`, with `z_α` the lower `α`-quantile.
pub fn predict_perm_power(rho: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidInput(format!(
            "power must lie in (0, 1), got {rho}"
        )));
    }
    let z_alpha = normal_quantile(alpha)?;
    let z_rho = normal_quantile(rho)?;
    Ok(normal_cdf(
        z_alpha + std::f64::consts::SQRT_2 * (z_rho - z_alpha),
    ))
}
