//! In-memory datasets and seeded synthetic generators.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{orthonormalize_columns, SymMatrix};
use crate::{Error, Result};

/// `n` samples of dimension `p`, stored sample-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    p: usize,
    n: usize,
    samples: Vec<f64>,
    source: String,
}

impl Dataset {
    pub fn new(p: usize, samples: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if p == 0 || samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !samples.len().is_multiple_of(p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: samples.len() % p,
            });
        }
        Ok(Self {
            p,
            n: samples.len() / p,
            samples,
            source: source.into(),
        })
    }

    /// Builds from a row-major `rows × cols` matrix whose columns are samples.
    pub fn from_columns(
        rows: usize,
        cols: usize,
        data: &[f64],
        source: impl Into<String>,
    ) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        let mut samples = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                samples[c * rows + r] = data[r * cols + c];
            }
        }
        Self::new(rows, samples, source)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.p..(i + 1) * self.p]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.p)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.samples
    }

    /// The uncentered sample covariance `(1/n) Σ x_i x_iᵀ`.
    pub fn sample_covariance(&self) -> SymMatrix {
        let p = self.p;
        let mut upper = vec![0.0; p * p];
        for x in self.iter() {
            for i in 0..p {
                let xi = x[i];
                if xi == 0.0 {
                    continue;
                }
                let row = &mut upper[i * p + i..(i + 1) * p];
                for (r, &xj) in row.iter_mut().zip(&x[i..]) {
                    *r += xi * xj;
                }
            }
        }
        let inv_n = 1.0 / self.n as f64;
        upper.iter_mut().for_each(|v| *v *= inv_n);
        SymMatrix::from_upper_row_major(p, upper).expect("p x p buffer")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SynthModel {
    /// `x = Σ_j √λ_j g_j u_j + σ w` with seeded orthonormal `u_j`.
    Spiked { spikes: Vec<f64>, sigma: f64 },
    /// Rotated two-level spectrum `{1, t, …, t}` with stable rank `beta`.
    StableRank { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub model: SynthModel,
    pub p: usize,
    pub n: usize,
    pub seed: u64,
}

/// Two-level spectrum `{1, t, …, t}` of length `p` with
/// `Σ d² / max d² = 1 + (p − 1) t² = beta`.
pub fn stable_rank_spectrum(beta: f64, p: usize) -> Result<Vec<f64>> {
    if p == 0 || !(beta >= 1.0 && beta <= p as f64) {
        return Err(Error::InvalidSynth(
            "stable rank must satisfy 1 <= beta <= p",
        ));
    }
    let mut spectrum = vec![0.0; p];
    spectrum[0] = 1.0;
    if p > 1 {
        let t = libm::sqrt((beta - 1.0) / (p as f64 - 1.0));
        spectrum[1..].iter_mut().for_each(|d| *d = t);
    }
    Ok(spectrum)
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 {
            return Err(Error::EmptyDataset);
        }
        match &self.model {
            SynthModel::Spiked { spikes, sigma } => {
                if spikes.len() >= self.p {
                    return Err(Error::InvalidSynth("spike rank must be smaller than p"));
                }
                if spikes.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                    return Err(Error::InvalidSynth("spike strengths must be positive"));
                }
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidSynth("noise level must be nonnegative"));
                }
            }
            SynthModel::StableRank { beta } => {
                stable_rank_spectrum(*beta, self.p)?;
            }
        }
        Ok(())
    }

    fn basis(&self, cols: usize) -> Vec<f64> {
        let p = self.p;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(0);
        loop {
            let mut q: Vec<f64> = (0..p * cols).map(|_| rng.sample(StandardNormal)).collect();
            if orthonormalize_columns(p, cols, &mut q) {
                return q;
            }
        }
    }

    /// Row-major `p × cols` orthonormal basis and per-column scales `√λ`.
    fn factors(&self) -> Result<(usize, Vec<f64>, Vec<f64>, f64)> {
        self.validate()?;
        Ok(match &self.model {
            SynthModel::Spiked { spikes, sigma } => {
                let r = spikes.len();
                let scales = spikes.iter().map(|l| libm::sqrt(*l)).collect();
                (r, self.basis(r), scales, *sigma)
            }
            SynthModel::StableRank { beta } => {
                let spectrum = stable_rank_spectrum(*beta, self.p)?;
                let scales = spectrum.iter().map(|d| libm::sqrt(*d)).collect();
                (self.p, self.basis(self.p), scales, 0.0)
            }
        })
    }

    pub fn generate(&self) -> Result<Dataset> {
        let (cols, basis, scales, sigma) = self.factors()?;
        let p = self.p;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        let mut samples = vec![0.0; p * self.n];
        let mut g = vec![0.0; cols];
        for x in samples.chunks_exact_mut(p) {
            for (gj, sj) in g.iter_mut().zip(&scales) {
                *gj = sj * rng.sample::<f64, _>(StandardNormal);
            }
            for (i, xi) in x.iter_mut().enumerate() {
                let row = &basis[i * cols..(i + 1) * cols];
                *xi = row.iter().zip(&g).map(|(u, c)| u * c).sum();
            }
            if sigma > 0.0 {
                for xi in x.iter_mut() {
                    *xi += sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        let source = match &self.model {
            SynthModel::Spiked { spikes, sigma } => alloc::format!(
                "synthetic:spiked(rank={}, sigma={}, p={}, n={}, seed={})",
                spikes.len(),
                sigma,
                p,
                self.n,
                self.seed
            ),
            SynthModel::StableRank { beta } => alloc::format!(
                "synthetic:stable_rank(beta={}, p={}, n={}, seed={})",
                beta,
                p,
                self.n,
                self.seed
            ),
        };
        Dataset::new(p, samples, source)
    }

    /// The covariance the generator samples from.
    pub fn population_covariance(&self) -> Result<SymMatrix> {
        let (cols, basis, scales, sigma) = self.factors()?;
        let p = self.p;
        Ok(SymMatrix::from_upper_fn(p, |i, j| {
            let mut v: f64 = (0..cols)
                .map(|c| scales[c] * scales[c] * basis[i * cols + c] * basis[j * cols + c])
                .sum();
            if i == j {
                v += sigma * sigma;
            }
            v
        }))
    }
}
