//! One-pass accumulation of the compressive covariance estimator and its
//! closed-form bias correction.
//!
//! With back-projections `z_i = R_i R_iᵀ x_i`, the biased estimate is
//!
//! ```text
//! Ĉ = Σ z_i z_iᵀ / (n (m² + m) μ₂²)
//! ```
//!
//! and its expectation is `C + κ/(m+1) diag(C) + tr(C)/(m+1) I`. The unbiased
//! estimate removes both terms using only `diag(Ĉ)` and `tr(Ĉ)`:
//!
//! ```text
//! Σ̂ = Ĉ − α₁ diag(Ĉ) − α₂ tr(Ĉ) I
//! α₁ = (κ/(m+1)) / (1 + κ/(m+1))
//! α₂ = 1 / ((1 + κ/(m+1)) (m + 1 + κ + p))
//! ```

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::SymMatrix;
use crate::projection::ProjectionSpec;
use crate::sketch::{Backprojector, ProjectedSample, SketchSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimateKind {
    Biased,
    Unbiased,
}

/// Which rank-1 update [`CovAccumulator::accumulate_with`] should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePath {
    /// Sparse when `nnz(z) <= p / 2`, dense otherwise.
    Auto,
    Sparse,
    Dense,
}

/// Running `Σ z_i z_iᵀ` (upper triangle only, unscaled) plus the sample count.
#[derive(Debug, Clone)]
pub struct CovAccumulator {
    spec: ProjectionSpec,
    p: usize,
    upper: Vec<f64>,
    count: u64,
    scratch: Vec<f64>,
}

impl CovAccumulator {
    pub fn new(spec: ProjectionSpec) -> Self {
        let p = spec.p();
        Self {
            spec,
            p,
            upper: vec![0.0; p * p],
            count: 0,
            scratch: Vec::new(),
        }
    }

    pub fn spec(&self) -> &ProjectionSpec {
        &self.spec
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn accumulate(&mut self, z: &ProjectedSample) -> Result<()> {
        self.accumulate_with(z, UpdatePath::Auto)
    }

    pub fn accumulate_with(&mut self, z: &ProjectedSample, path: UpdatePath) -> Result<()> {
        if z.p() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: z.p(),
            });
        }
        let dense = match path {
            UpdatePath::Auto => z.nnz() > self.p / 2,
            UpdatePath::Sparse => false,
            UpdatePath::Dense => true,
        };
        if dense {
            self.dense_update(z);
        } else {
            self.sparse_update(z);
        }
        self.count += 1;
        Ok(())
    }

    fn sparse_update(&mut self, z: &ProjectedSample) {
        let p = self.p;
        let (idx, val) = (z.indices(), z.values());
        for a in 0..idx.len() {
            let row = &mut self.upper[idx[a] * p..(idx[a] + 1) * p];
            let za = val[a];
            for b in a..idx.len() {
                row[idx[b]] += za * val[b];
            }
        }
    }

    fn dense_update(&mut self, z: &ProjectedSample) {
        let p = self.p;
        self.scratch.clear();
        self.scratch.resize(p, 0.0);
        for (&i, &v) in z.indices().iter().zip(z.values()) {
            self.scratch[i] = v;
        }
        for i in 0..p {
            let zi = self.scratch[i];
            if zi == 0.0 {
                continue;
            }
            let row = &mut self.upper[i * p + i..(i + 1) * p];
            for (r, &zj) in row.iter_mut().zip(&self.scratch[i..]) {
                if zj != 0.0 {
                    *r += zi * zj;
                }
            }
        }
    }

    /// Adds another accumulator's sums and counts.
    pub fn merge(&mut self, other: &CovAccumulator) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch);
        }
        for (a, b) in self.upper.iter_mut().zip(&other.upper) {
            *a += b;
        }
        self.count += other.count;
        Ok(())
    }

    /// The unscaled symmetric sum `Σ z_i z_iᵀ`.
    pub fn sum(&self) -> SymMatrix {
        SymMatrix::from_upper_row_major(self.p, self.upper.clone())
            .expect("accumulator buffer is p x p")
    }

    /// `Ĉ = sum / (count · (m² + m) · μ₂²)`.
    pub fn finalize_biased(&self) -> Result<CovEstimate> {
        self.finalize_from(self.upper.clone())
    }

    /// Like [`finalize_biased`](Self::finalize_biased), reusing the
    /// accumulator's buffer instead of copying it.
    pub fn into_biased(mut self) -> Result<CovEstimate> {
        let upper = core::mem::take(&mut self.upper);
        self.finalize_from(upper)
    }

    fn finalize_from(&self, mut data: Vec<f64>) -> Result<CovEstimate> {
        if self.count == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let moments = self.spec.moments();
        let m = self.spec.m() as f64;
        let scale = 1.0 / (self.count as f64 * (m * m + m) * moments.mu2 * moments.mu2);
        let p = self.p;
        for i in 0..p {
            for v in &mut data[i * p + i..(i + 1) * p] {
                *v *= scale;
            }
        }
        let matrix = SymMatrix::from_upper_row_major(p, data)?;
        Ok(CovEstimate {
            matrix,
            kind: EstimateKind::Biased,
            params: EstimateParams::from_spec(&self.spec, self.count),
            wall_time_seconds: 0.0,
        })
    }
}

/// Provenance of an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    pub spec: ProjectionSpec,
    pub m: usize,
    pub p: usize,
    /// `None` for Gaussian projections.
    pub s: Option<f64>,
    pub kappa: f64,
    pub n: u64,
    pub gamma: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
}

impl EstimateParams {
    fn from_spec(spec: &ProjectionSpec, n: u64) -> Self {
        Self {
            spec: *spec,
            m: spec.m(),
            p: spec.p(),
            s: spec.dist().sparsity(),
            kappa: spec.moments().kappa,
            n,
            gamma: spec.gamma(),
            alpha1: None,
            alpha2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovEstimate {
    pub matrix: SymMatrix,
    pub kind: EstimateKind,
    pub params: EstimateParams,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasCoefficients {
    pub alpha1: f64,
    pub alpha2: f64,
}

/// `α₁` and `α₂` for kurtosis `kappa` and dimensions `m`, `p`.
pub fn bias_coefficients(kappa: f64, m: usize, p: usize) -> Result<BiasCoefficients> {
    let m1 = m as f64 + 1.0;
    let ratio = kappa / m1;
    let first = 1.0 + ratio;
    let second = m1 + kappa + p as f64;
    if first == 0.0 {
        return Err(Error::SingularCoefficients {
            kappa,
            m,
            p,
            reason: "kappa = -(m + 1); for sparse-sign projections this is s = 1 with m = 1",
        });
    }
    if second == 0.0 {
        return Err(Error::SingularCoefficients {
            kappa,
            m,
            p,
            reason: "m + 1 + kappa + p = 0",
        });
    }
    Ok(BiasCoefficients {
        alpha1: ratio / first,
        alpha2: 1.0 / (first * second),
    })
}

/// `Ĉ − α₁ diag(Ĉ) − α₂ tr(Ĉ) I` applied to a plain matrix.
pub fn debias_matrix(matrix: &SymMatrix, kappa: f64, m: usize) -> Result<SymMatrix> {
    let p = matrix.dim();
    let coeffs = bias_coefficients(kappa, m, p)?;
    let shift = coeffs.alpha2 * matrix.trace();
    let mut out = matrix.clone();
    for i in 0..p {
        let d = matrix.get(i, i);
        out.set(i, i, d - coeffs.alpha1 * d - shift);
    }
    Ok(out)
}

/// Turns a biased estimate into the unbiased one.
pub fn debias(est: &CovEstimate) -> Result<CovEstimate> {
    if est.kind != EstimateKind::Biased {
        return Err(Error::NotBiased(est.kind));
    }
    let (kappa, m, p) = (est.params.kappa, est.params.m, est.matrix.dim());
    let coeffs = bias_coefficients(kappa, m, p)?;
    let matrix = debias_matrix(&est.matrix, kappa, m)?;
    let mut params = est.params;
    params.alpha1 = Some(coeffs.alpha1);
    params.alpha2 = Some(coeffs.alpha2);
    Ok(CovEstimate {
        matrix,
        kind: EstimateKind::Unbiased,
        params,
        wall_time_seconds: est.wall_time_seconds,
    })
}

/// Regenerates every `R_i`, back-projects and accumulates.
pub fn accumulate_sketches(sketches: &SketchSet) -> Result<CovAccumulator> {
    let spec = *sketches.spec();
    let mut acc = CovAccumulator::new(spec);
    let mut backprojector = Backprojector::new(spec.p());
    let mut z = ProjectedSample::new(spec.p());
    for (i, y) in sketches.iter().enumerate() {
        let r = spec.generate(i as u64)?;
        backprojector.apply(&r, y, &mut z)?;
        acc.accumulate(&z)?;
    }
    Ok(acc)
}

/// Full pipeline from sketches to an estimate of the requested kind.
pub fn estimate(sketches: &SketchSet, kind: EstimateKind) -> Result<CovEstimate> {
    estimate_with_clock(sketches, kind, || 0.0)
}

/// Like [`estimate`], recording `now()` differences (seconds) as wall time.
pub fn estimate_with_clock<F: FnMut() -> f64>(
    sketches: &SketchSet,
    kind: EstimateKind,
    mut now: F,
) -> Result<CovEstimate> {
    let start = now();
    let biased = accumulate_sketches(sketches)?.into_biased()?;
    let mut out = match kind {
        EstimateKind::Biased => biased,
        EstimateKind::Unbiased => debias(&biased)?,
    };
    out.wall_time_seconds = now() - start;
    Ok(out)
}
