//! Spectral analytics for symmetric matrices.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::estimator::EstimateKind;
use crate::linalg::{dot, norm2, symmetric_eigen, SymMatrix};
use crate::{Error, Result};

/// Matrices up to this dimension go straight to the dense eigensolver.
pub const DENSE_EIGEN_MAX_DIM: usize = 64;
/// Power iterations before falling back to the dense eigensolver.
pub const MAX_POWER_ITERATIONS: usize = 5000;

const POWER_TOLERANCE: f64 = 1e-13;
const START_SEED: u64 = 0x5eed_c0ff_ee00_0001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub normalized_error: f64,
    pub spectral_norm_target: f64,
    pub spectral_norm_diff: f64,
    pub gamma: Option<f64>,
    pub kind: Option<EstimateKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    /// Leading eigenvalues, descending by magnitude.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors matching `eigenvalues`, largest-magnitude coordinate
    /// positive.
    pub eigenvectors: Vec<Vec<f64>>,
    pub stable_rank: f64,
}

/// Deterministic start vector: normalized ones plus a seeded unit perturbation.
fn start_vector(p: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut noise: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let noise_norm = norm2(&noise);
    let base = 1.0 / libm::sqrt(p as f64);
    for v in noise.iter_mut() {
        *v = base + 0.5 * *v / noise_norm;
    }
    let norm = norm2(&noise);
    noise.iter_mut().for_each(|v| *v /= norm);
    noise
}

/// Power iteration for `max |λ|`, tracking `‖A v‖` (the Rayleigh quotient of
/// `A²`) until its relative change stagnates. `None` if it does not settle.
pub fn power_spectral_norm(a: &SymMatrix, max_iterations: usize) -> Option<f64> {
    let p = a.dim();
    let mut v = start_vector(p);
    let mut w = vec![0.0; p];
    let mut previous = f64::NAN;
    for _ in 0..max_iterations {
        a.matvec_into(&v, &mut w);
        let wn = norm2(&w);
        if wn == 0.0 {
            return Some(0.0);
        }
        // `‖A v‖ / ‖v‖` with `‖v‖` recomputed, so `A = I` gives exactly 1.
        let norm = wn / norm2(&v);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
        if libm::fabs(norm - previous) <= POWER_TOLERANCE * norm {
            return Some(norm);
        }
        previous = norm;
    }
    None
}

/// Operator 2-norm `max |λ(A)|`.
pub fn spectral_norm(a: &SymMatrix) -> Result<f64> {
    if a.is_zero() {
        return Ok(0.0);
    }
    if a.dim() > DENSE_EIGEN_MAX_DIM {
        if let Some(norm) = power_spectral_norm(a, MAX_POWER_ITERATIONS) {
            return Ok(norm);
        }
        log::debug!("power iteration did not settle; using dense eigensolver");
    }
    let eig = symmetric_eigen(a)?;
    Ok(eig
        .values
        .iter()
        .fold(0.0f64, |acc, v| acc.max(libm::fabs(*v))))
}

/// `‖estimate − reference‖₂ / ‖reference‖₂`.
pub fn normalized_error(estimate: &SymMatrix, reference: &SymMatrix) -> Result<ErrorReport> {
    let target = spectral_norm(reference)?;
    if target == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let diff = spectral_norm(&estimate.sub(reference)?)?;
    Ok(ErrorReport {
        normalized_error: diff / target,
        spectral_norm_target: target,
        spectral_norm_diff: diff,
        gamma: None,
        kind: None,
    })
}

/// `‖C‖_F² / ‖C‖₂²`.
pub fn stable_rank(c: &SymMatrix) -> Result<f64> {
    let spectral = spectral_norm(c)?;
    if spectral == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(c.frobenius_norm_sq() / (spectral * spectral))
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if libm::fabs(*x) > libm::fabs(v[best]) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dense_top(c: &SymMatrix, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let eig = symmetric_eigen(c)?;
    let mut order: Vec<usize> = (0..c.dim()).collect();
    // stable: ties keep ascending-eigenvalue order
    order.sort_by(|&a, &b| libm::fabs(eig.values[b]).total_cmp(&libm::fabs(eig.values[a])));
    let values = order.iter().take(k).map(|&i| eig.values[i]).collect();
    let vectors = order.iter().take(k).map(|&i| eig.vector(i)).collect();
    Ok((values, vectors))
}

/// Deflated power iteration; `None` if any pair fails to converge.
fn deflated_power_top(c: &SymMatrix, k: usize) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let p = c.dim();
    let scale = c.max_abs() * p as f64;
    let mut values: Vec<f64> = Vec::with_capacity(k);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut w = vec![0.0; p];

    let apply = |x: &[f64], out: &mut [f64], values: &[f64], vectors: &[Vec<f64>]| {
        c.matvec_into(x, out);
        for (lambda, u) in values.iter().zip(vectors) {
            let coeff = lambda * dot(u, x);
            for (o, ui) in out.iter_mut().zip(u) {
                *o -= coeff * ui;
            }
        }
    };

    for _ in 0..k {
        let mut v = start_vector(p);
        let mut converged = false;
        for _ in 0..MAX_POWER_ITERATIONS {
            apply(&v, &mut w, &values, &vectors);
            let lambda = dot(&v, &w);
            let residual = w
                .iter()
                .zip(&v)
                .map(|(wi, vi)| (wi - lambda * vi) * (wi - lambda * vi))
                .sum::<f64>();
            if libm::sqrt(residual) <= 1e-12 * scale {
                converged = true;
                values.push(lambda);
                break;
            }
            let norm = norm2(&w);
            if norm == 0.0 {
                converged = true;
                values.push(0.0);
                break;
            }
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        if !converged {
            return None;
        }
        vectors.push(v);
    }
    Some((values, vectors))
}

/// The `k` leading eigenpairs by `|λ|`.
pub fn top_eigenvectors(c: &SymMatrix, k: usize) -> Result<SpectrumSummary> {
    let p = c.dim();
    if k == 0 || k > p {
        return Err(Error::InvalidEigenCount { k, p });
    }
    let (eigenvalues, mut eigenvectors) = if p <= DENSE_EIGEN_MAX_DIM {
        dense_top(c, k)?
    } else {
        match deflated_power_top(c, k) {
            Some(found) => found,
            None => {
                log::debug!("deflated power iteration did not converge; using dense eigensolver");
                dense_top(c, k)?
            }
        }
    };
    eigenvectors.iter_mut().for_each(|v| fix_sign(v));
    let stable_rank = if c.is_zero() { 0.0 } else { stable_rank(c)? };
    Ok(SpectrumSummary {
        eigenvalues,
        eigenvectors,
        stable_rank,
    })
}
