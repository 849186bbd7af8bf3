//! Seeded synthetic sources.
//!
//! Every draw comes from a ChaCha8 stream keyed by a 64-bit seed (expanded
//! with SplitMix64) and a 64-bit stream id, so a Monte Carlo trial owns its
//! randomness independently of how trials are scheduled. Gaussian draws use
//! the ziggurat sampler of `rand_distr`; Dirichlet rows are normalised
//! Marsaglia–Tsang gamma draws (with the `U^{1/a}` boost for shape below one).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::SampleMatrix;

/// Name of the generator recorded in experiment metadata.
pub const RNG_ALGORITHM: &str = "chacha8(key=splitmix64(seed), stream)";

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a sequence of indices into a single stream id.
pub fn mix_stream(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6A09_E667_F3BC_C908, |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// A `(seed, stream)` pair naming an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// The stream for `parts` (e.g. size index, trial index, role) under `seed`.
    pub fn derive(seed: u64, parts: &[u64]) -> Self {
        Self::new(seed, mix_stream(parts))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut z = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            z = splitmix64(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    P,
    Q,
}

/// Pair of distributions `(P, Q)`; `eps == 0` is the null configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SourceSpec {
    /// `P = N(0, I_d)`, `Q = N(a, I_d)` with `a` the first `j` coordinates set to `eps`.
    GaussianShift { d: usize, j: usize, eps: f64 },
    /// `P = Dirichlet(base·1)`, `Q = Dirichlet((1+eps)·base·1)`.
    Dirichlet {
        d: usize,
        eps: f64,
        #[serde(default = "default_base")]
        base: f64,
    },
}

fn default_base() -> f64 {
    1.0
}

impl SourceSpec {
    pub fn gaussian_shift(d: usize, j: usize, eps: f64) -> Result<Self> {
        let spec = SourceSpec::GaussianShift { d, j, eps };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dirichlet(d: usize, eps: f64) -> Result<Self> {
        let spec = SourceSpec::Dirichlet { d, eps, base: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceSpec::GaussianShift { d, j, eps } => {
                if d == 0 {
                    return Err(Error::InvalidSpec("dimension must be >= 1".into()));
                }
                if j == 0 || j > d {
                    return Err(Error::InvalidSpec(format!(
                        "shifted coordinate count must lie in [1, {d}], got {j}"
                    )));
                }
                if !(eps.is_finite() && eps >= 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "perturbation must be finite and >= 0, got {eps}"
                    )));
                }
            }
            SourceSpec::Dirichlet { d, eps, base } => {
                if d < 2 {
                    return Err(Error::InvalidSpec("Dirichlet needs d >= 2".into()));
                }
                if !(eps.is_finite() && eps >= 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "perturbation must be finite and >= 0, got {eps}"
                    )));
                }
                if !(base.is_finite() && base > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "Dirichlet base parameter must be positive, got {base}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        match *self {
            SourceSpec::GaussianShift { d, .. } | SourceSpec::Dirichlet { d, .. } => d,
        }
    }

    pub fn eps(&self) -> f64 {
        match *self {
            SourceSpec::GaussianShift { eps, .. } | SourceSpec::Dirichlet { eps, .. } => eps,
        }
    }

    pub fn is_null(&self) -> bool {
        self.eps() == 0.0
    }

    /// The same source with the perturbation removed.
    pub fn null_version(&self) -> Self {
        match *self {
            SourceSpec::GaussianShift { d, j, .. } => SourceSpec::GaussianShift { d, j, eps: 0.0 },
            SourceSpec::Dirichlet { d, base, .. } => SourceSpec::Dirichlet { d, eps: 0.0, base },
        }
    }
}

/// `(eps, …, eps, 0, …, 0)` with `j` leading entries.
pub fn shift_vector(d: usize, j: usize, eps: f64) -> Result<Vec<f64>> {
    if j == 0 || j > d {
        return Err(Error::InvalidInput(format!(
            "shifted coordinate count must lie in [1, {d}], got {j}"
        )));
    }
    let mut v = vec![0.0; d];
    v[..j].fill(eps);
    Ok(v)
}

/// Draws `n` i.i.d. rows from `P` or `Q`.
pub fn sample(source: &SourceSpec, which: Which, n: usize, rng: RngState) -> Result<SampleMatrix> {
    source.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be >= 1".into()));
    }
    let mut gen = rng.rng();
    let d = source.d();
    let mut data = Vec::with_capacity(n * d);
    match *source {
        SourceSpec::GaussianShift { j, eps, .. } => {
            let shift = match which {
                Which::P => vec![0.0; d],
                Which::Q => shift_vector(d, j, eps)?,
            };
            for _ in 0..n {
                for s in &shift {
                    let z: f64 = gen.sample(StandardNormal);
                    data.push(z + s);
                }
            }
        }
        SourceSpec::Dirichlet { eps, base, .. } => {
            let shape = match which {
                Which::P => base,
                Which::Q => (1.0 + eps) * base,
            };
            let gamma = Gamma::new(shape, 1.0)
                .map_err(|e| Error::InvalidSpec(format!("gamma shape {shape}: {e}")))?;
            let mut row = vec![0.0; d];
            for _ in 0..n {
                let mut total = 0.0;
                loop {
                    for slot in row.iter_mut() {
                        *slot = gamma.sample(&mut gen);
                        total += *slot;
                    }
                    // All-zero rows are possible only through underflow at tiny shapes.
                    if total > 0.0 {
                        break;
                    }
                    total = 0.0;
                }
                data.extend(row.iter().map(|g| g / total));
            }
        }
    }
    SampleMatrix::from_vec(data, n, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_vector_examples() {
        assert_eq!(shift_vector(4, 2, 0.3).unwrap(), vec![0.3, 0.3, 0.0, 0.0]);
        assert_eq!(shift_vector(3, 3, 0.0).unwrap(), vec![0.0; 3]);
        assert_eq!(shift_vector(1, 1, 1.0).unwrap(), vec![1.0]);
        assert!(shift_vector(3, 0, 1.0).is_err());
        assert!(shift_vector(3, 4, 1.0).is_err());
    }

    #[test]
    fn determinism() {
        let src = SourceSpec::gaussian_shift(3, 1, 0.5).unwrap();
        let a = sample(&src, Which::Q, 50, RngState::new(7, 3)).unwrap();
        let b = sample(&src, Which::Q, 50, RngState::new(7, 3)).unwrap();
        assert_eq!(a, b);
        let c = sample(&src, Which::Q, 50, RngState::new(7, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn null_generators_coincide() {
        let src = SourceSpec::gaussian_shift(4, 2, 0.0).unwrap();
        let rng = RngState::new(11, 0);
        assert_eq!(
            sample(&src, Which::P, 20, rng).unwrap(),
            sample(&src, Which::Q, 20, rng).unwrap()
        );
    }

    #[test]
    fn dirichlet_rows_on_simplex() {
        for eps in [0.0, 0.4] {
            let src = SourceSpec::dirichlet(3, eps).unwrap();
            for seed in 0..5 {
                let x = sample(&src, Which::Q, 200, RngState::new(seed, 1)).unwrap();
                for row in x.rows() {
                    assert!(row.iter().all(|v| *v >= 0.0));
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
        let tiny = SourceSpec::Dirichlet {
            d: 4,
            eps: 0.0,
            base: 0.05,
        };
        let x = sample(&tiny, Which::P, 100, RngState::new(1, 1)).unwrap();
        assert!(x
            .rows()
            .all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn shifted_mean_within_band() {
        let src = SourceSpec::gaussian_shift(10, 5, 0.3).unwrap();
        let n = 10_000;
        let x = sample(&src, Which::Q, n, RngState::new(2024, 9)).unwrap();
        for c in 0..10 {
            let mean = x.rows().map(|r| r[c]).sum::<f64>() / n as f64;
            let want = if c < 5 { 0.3 } else { 0.0 };
            assert!((mean - want).abs() < 0.03, "coordinate {c}: {mean}");
        }
    }

    #[test]
    fn standard_normal_moments() {
        let src = SourceSpec::gaussian_shift(2, 1, 0.0).unwrap();
        let n = 100_000;
        let x = sample(&src, Which::P, n, RngState::new(5, 5)).unwrap();
        for c in 0..2 {
            let mean = x.rows().map(|r| r[c]).sum::<f64>() / n as f64;
            let var = x.rows().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() < 0.01, "{mean}");
            assert!((var - 1.0).abs() < 0.02, "{var}");
        }
    }

    #[test]
    fn streams_are_uncorrelated() {
        let src = SourceSpec::gaussian_shift(1, 1, 0.0).unwrap();
        let n = 10_000;
        let a = sample(&src, Which::P, n, RngState::derive(99, &[0, 0])).unwrap();
        let b = sample(&src, Which::P, n, RngState::derive(99, &[0, 1])).unwrap();
        let (a, b) = (a.as_slice(), b.as_slice());
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 0.02, "{corr}");
    }

    #[test]
    fn invalid_specs() {
        assert!(SourceSpec::gaussian_shift(0, 1, 0.1).is_err());
        assert!(SourceSpec::gaussian_shift(3, 4, 0.1).is_err());
        assert!(SourceSpec::gaussian_shift(3, 1, -0.1).is_err());
        assert!(SourceSpec::dirichlet(1, 0.1).is_err());
        let src = SourceSpec::gaussian_shift(3, 1, 0.1).unwrap();
        assert!(sample(&src, Which::P, 0, RngState::new(0, 0)).is_err());
    }
}
