//! Brute-force oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xmmd_core::{eval_kernel, KernelSpec, SampleMatrix};

pub fn k(spec: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    eval_kernel(spec, a, b).unwrap()
}

pub fn h(spec: &KernelSpec, x: &[f64], x2: &[f64], y: &[f64], y2: &[f64]) -> f64 {
    k(spec, x, x2) - k(spec, x, y2) - k(spec, y, x2) + k(spec, y, y2)
}

/// Average of `h` over every `i ≠ i'`, `j ≠ j'`.
pub fn mmd_u_oracle(spec: &KernelSpec, x: &SampleMatrix, y: &SampleMatrix) -> f64 {
    let (n, m) = (x.n(), y.n());
    let mut total = 0.0;
    for i in 0..n {
        for i2 in 0..n {
            if i == i2 {
                continue;
            }
            for j in 0..m {
                for j2 in 0..m {
                    if j != j2 {
                        total += h(spec, x.row(i), x.row(i2), y.row(j), y.row(j2));
                    }
                }
            }
        }
    }
    total / (n * (n - 1) * m * (m - 1)) as f64
}

/// Average of `h(X1_i, X2_i', Y1_j, Y2_j')` over all four split indices.
pub fn cross_oracle(
    spec: &KernelSpec,
    x1: &SampleMatrix,
    x2: &SampleMatrix,
    y1: &SampleMatrix,
    y2: &SampleMatrix,
) -> f64 {
    let mut total = 0.0;
    for a in x1.rows() {
        for a2 in x2.rows() {
            for b in y1.rows() {
                for b2 in y2.rows() {
                    total += h(spec, a, a2, b, b2);
                }
            }
        }
    }
    total / (x1.n() * x2.n() * y1.n() * y2.n()) as f64
}

/// `(ux, uy)` from their definition as differences of kernel means.
pub fn witness_oracle(
    spec: &KernelSpec,
    x1: &SampleMatrix,
    x2: &SampleMatrix,
    y1: &SampleMatrix,
    y2: &SampleMatrix,
) -> (Vec<f64>, Vec<f64>) {
    let u = |p: &[f64]| {
        x2.rows().map(|q| k(spec, p, q)).sum::<f64>() / x2.n() as f64
            - y2.rows().map(|q| k(spec, p, q)).sum::<f64>() / y2.n() as f64
    };
    (x1.rows().map(u).collect(), y1.rows().map(u).collect())
}

pub fn variance_loop(values: &[f64]) -> f64 {
    let mut mu = 0.0;
    for v in values {
        mu += v;
    }
    mu /= values.len() as f64;
    let mut acc = 0.0;
    for v in values {
        acc += (v - mu) * (v - mu);
    }
    acc / values.len() as f64
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}

pub fn random_sample(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: f64) -> SampleMatrix {
    let data: Vec<f64> = (0..n * d)
        .map(|_| rng.random_range(-1.5..1.5) + shift)
        .collect();
    SampleMatrix::from_vec(data, n, d).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_kernel(rng: &mut ChaCha8Rng) -> KernelSpec {
    match rng.random_range(0..3) {
        0 => KernelSpec::gaussian(rng.random_range(0.2..2.0)).unwrap(),
        1 => KernelSpec::laplace(rng.random_range(0.2..2.0)).unwrap(),
        _ => KernelSpec::polynomial(rng.random_range(1..4), rng.random_range(0.1..1.0)).unwrap(),
    }
}
