//! Brute-force and Monte Carlo checks of the expectation identities behind the
//! estimator.
//!
//! For `G = R Rᵀ` with columns `c_k`, the moment matrices `E_{k,l} = E[c_k c_lᵀ]`
//! have the closed forms
//!
//! ```text
//! E_{k,k} = m μ₂² (κ + m + 1) e_k e_kᵀ + m μ₂² I
//! E_{k,l} = m² μ₂² e_k e_lᵀ + m μ₂² e_l e_kᵀ        (k ≠ l)
//! ```
//!
//! and summing them gives
//! `E[G x xᵀ G] = (m² + m) μ₂² x xᵀ + κ m μ₂² diag(x xᵀ) + m μ₂² ‖x‖² I`. The closed forms here are transcribed independently of
//! the estimator module; Monte Carlo means are compared entrywise against
//! them with bands of four standard errors.
//!
//! Trials are split into fixed-size shards whose results are merged in shard
//! order, so reports depend only on the seed and never on how a
//! [`ShardExecutor`] schedules the work.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::estimator::{accumulate_sketches, debias};
use crate::linalg::SymMatrix;
use crate::metrics::spectral_norm;
use crate::projection::{derive_seed, moments, Distribution, ProjectionSpec};
use crate::sketch::sketch_dataset;
use crate::synth::Dataset;
use crate::{Error, Result};

/// Minimum trials for moment-matrix and single-sample checks.
pub const MIN_MOMENT_TRIALS: usize = 10_000;
/// Minimum trials (independent master seeds) for the full-estimator check.
pub const MIN_ESTIMATOR_TRIALS: usize = 1_000;
/// Entries must lie within this many standard errors of the closed form.
pub const BAND_SIGMAS: f64 = 4.0;
/// Two-sided `P(|Z| > 4)` for a standard normal.
pub const TAIL_PROBABILITY: f64 = 6.334e-5;
/// Trials per shard.
pub const SHARD_TRIALS: usize = 2048;

/// Runs `count` independent jobs and returns their results in index order.
pub trait ShardExecutor {
    fn map<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs shards one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ShardExecutor for Sequential {
    fn map<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(job).collect()
    }
}

/// Per-entry running mean and variance (Welford), mergeable with Chan's
/// parallel update.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryStats {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl EntryStats {
    pub fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn push(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let delta = x - *mean;
            *mean += delta / n;
            *m2 += delta * (x - *mean);
        }
    }

    pub fn merge(&mut self, other: &EntryStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Standard error of each mean, from the unbiased sample variance.
    pub fn std_error(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.m2
            .iter()
            .map(|m2| {
                if self.count < 2 {
                    0.0
                } else {
                    libm::sqrt(m2 / (n - 1.0) / n)
                }
            })
            .collect()
    }
}

fn run_sharded<E, F>(executor: &E, trials: usize, len: usize, trial: F) -> EntryStats
where
    E: ShardExecutor,
    F: Fn(usize, &mut EntryStats) + Sync + Send,
{
    let shards = trials.div_ceil(SHARD_TRIALS);
    let parts = executor.map(shards, |shard| {
        let mut stats = EntryStats::new(len);
        let end = ((shard + 1) * SHARD_TRIALS).min(trials);
        for t in shard * SHARD_TRIALS..end {
            trial(t, &mut stats);
        }
        stats
    });
    let mut total = EntryStats::new(len);
    for part in &parts {
        total.merge(part);
    }
    total
}

/// `E_{k,k}` as a row-major `p × p` matrix.
pub fn closed_form_ekk(dist: &Distribution, m: usize, p: usize, k: usize) -> Result<Vec<f64>> {
    let mom = moments(dist)?;
    if k >= p {
        return Err(Error::IndexOutOfRange { index: k, p });
    }
    let m = m as f64;
    let base = m * mom.mu2 * mom.mu2;
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        out[i * p + i] = base;
    }
    out[k * p + k] += base * (mom.kappa + m + 1.0);
    Ok(out)
}

/// `E_{k,l}` for `k ≠ l` as a row-major `p × p` matrix.
pub fn closed_form_ekl(
    dist: &Distribution,
    m: usize,
    p: usize,
    k: usize,
    l: usize,
) -> Result<Vec<f64>> {
    let mom = moments(dist)?;
    for index in [k, l] {
        if index >= p {
            return Err(Error::IndexOutOfRange { index, p });
        }
    }
    if k == l {
        return Err(Error::DiagonalPair(k));
    }
    let m = m as f64;
    let mu2sq = mom.mu2 * mom.mu2;
    let mut out = vec![0.0; p * p];
    out[k * p + l] = m * m * mu2sq;
    out[l * p + k] = m * mu2sq;
    Ok(out)
}

/// `E[R Rᵀ x xᵀ R Rᵀ]` in closed form.
pub fn closed_form_single_sample(dist: &Distribution, m: usize, x: &[f64]) -> Result<SymMatrix> {
    let mom = moments(dist)?;
    let m = m as f64;
    let mu2sq = mom.mu2 * mom.mu2;
    let energy: f64 = x.iter().map(|v| v * v).sum();
    Ok(SymMatrix::from_upper_fn(x.len(), |i, j| {
        let mut v = (m * m + m) * mu2sq * x[i] * x[j];
        if i == j {
            v += mom.kappa * m * mu2sq * x[i] * x[i] + m * mu2sq * energy;
        }
        v
    }))
}

/// Right-hand side of `E[Ĉ] = C + κ/(m+1) diag(C) + tr(C)/(m+1) I`.
pub fn expected_biased(c: &SymMatrix, kappa: f64, m: usize) -> SymMatrix {
    let m1 = m as f64 + 1.0;
    let trace = c.trace();
    SymMatrix::from_upper_fn(c.dim(), |i, j| {
        if i == j {
            c.get(i, i) + kappa / m1 * c.get(i, i) + trace / m1
        } else {
            c.get(i, j)
        }
    })
}

/// Monte Carlo mean and per-entry standard error of a row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloEstimate {
    pub trials: usize,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl From<EntryStats> for MonteCarloEstimate {
    fn from(stats: EntryStats) -> Self {
        Self {
            trials: stats.count() as usize,
            std_error: stats.std_error(),
            mean: stats.mean,
        }
    }
}

fn gram(spec: &ProjectionSpec, trial: usize) -> Result<Vec<f64>> {
    let p = spec.p();
    let r = spec.generate(trial as u64)?.to_dense();
    let mut g = vec![0.0; p * p];
    for col in r.chunks_exact(p) {
        for i in 0..p {
            let ri = col[i];
            if ri == 0.0 {
                continue;
            }
            for j in 0..p {
                g[i * p + j] += ri * col[j];
            }
        }
    }
    Ok(g)
}

fn check_trials(trials: usize, min: usize) -> Result<()> {
    if trials < min {
        return Err(Error::TooFewTrials { min, got: trials });
    }
    Ok(())
}

/// Empirical mean of `c_k c_lᵀ` over fresh draws of `R` (`k == l` allowed).
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_ekl<E: ShardExecutor>(
    dist: &Distribution,
    m: usize,
    p: usize,
    k: usize,
    l: usize,
    trials: usize,
    seed: u64,
    executor: &E,
) -> Result<MonteCarloEstimate> {
    check_trials(trials, MIN_MOMENT_TRIALS)?;
    let spec = ProjectionSpec::new(*dist, p, m, seed)?;
    for index in [k, l] {
        if index >= p {
            return Err(Error::IndexOutOfRange { index, p });
        }
    }
    let stats = run_sharded(executor, trials, p * p, |t, stats| {
        let g = gram(&spec, t).expect("spec validated");
        let mut outer = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..p {
                outer[a * p + b] = g[a * p + k] * g[b * p + l];
            }
        }
        stats.push(&outer);
    });
    Ok(stats.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckTarget {
    Ekk,
    Ekl,
    SingleSampleExpectation,
    FullEstimatorExpectation,
}

/// Outcome of one Monte Carlo comparison.
///
/// Each tested entry gets the band `4·se + floor`; the reported entry is the
/// one with the largest deviation relative to its band, so `passed` holds
/// exactly when `max_abs_deviation <= max_allowed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheckReport {
    pub target: CheckTarget,
    pub label: String,
    pub trials: usize,
    pub seed: u64,
    pub max_abs_deviation: f64,
    pub max_allowed: f64,
    pub passed: bool,
    pub worst_entry: (usize, usize),
    pub worst_sigmas: f64,
    pub largest_raw_deviation: f64,
    /// Entries with nonzero sampling variance.
    pub entries_checked: usize,
    /// Union bound on a false failure across those entries.
    pub false_failure_bound: f64,
    /// `‖mean(Ĉ) − C‖₂ / ‖C‖₂` (full-estimator checks only).
    pub biased_mean_relative_error: Option<f64>,
    /// `‖mean(Σ̂) − C‖₂ / ‖C‖₂` (full-estimator checks only).
    pub unbiased_mean_relative_error: Option<f64>,
}

struct Comparison {
    max_abs_deviation: f64,
    max_allowed: f64,
    worst_entry: (usize, usize),
    worst_sigmas: f64,
    largest_raw_deviation: f64,
    entries_checked: usize,
}

fn compare(p: usize, expected: &[f64], mc: &MonteCarloEstimate, upper_only: bool) -> Comparison {
    let scale = expected.iter().fold(0.0f64, |a, v| a.max(libm::fabs(*v)));
    let floor = 1e-12 * (1.0 + scale);
    let mut out = Comparison {
        max_abs_deviation: 0.0,
        max_allowed: floor,
        worst_entry: (0, 0),
        worst_sigmas: 0.0,
        largest_raw_deviation: 0.0,
        entries_checked: 0,
    };
    let mut worst_ratio = -1.0;
    for i in 0..p {
        for j in 0..p {
            if upper_only && j < i {
                continue;
            }
            let idx = i * p + j;
            let dev = libm::fabs(mc.mean[idx] - expected[idx]);
            let se = mc.std_error[idx];
            let band = BAND_SIGMAS * se + floor;
            if se > 0.0 {
                out.entries_checked += 1;
            }
            out.largest_raw_deviation = out.largest_raw_deviation.max(dev);
            let ratio = dev / band;
            if ratio > worst_ratio {
                worst_ratio = ratio;
                out.max_abs_deviation = dev;
                out.max_allowed = band;
                out.worst_entry = (i, j);
                out.worst_sigmas = if se > 0.0 { dev / se } else { 0.0 };
            }
        }
    }
    out
}

fn report(
    target: CheckTarget,
    label: String,
    seed: u64,
    trials: usize,
    cmp: Comparison,
) -> MomentCheckReport {
    MomentCheckReport {
        target,
        label,
        trials,
        seed,
        passed: cmp.max_abs_deviation <= cmp.max_allowed,
        max_abs_deviation: cmp.max_abs_deviation,
        max_allowed: cmp.max_allowed,
        worst_entry: cmp.worst_entry,
        worst_sigmas: cmp.worst_sigmas,
        largest_raw_deviation: cmp.largest_raw_deviation,
        entries_checked: cmp.entries_checked,
        false_failure_bound: cmp.entries_checked as f64 * TAIL_PROBABILITY,
        biased_mean_relative_error: None,
        unbiased_mean_relative_error: None,
    }
}

/// Monte Carlo `E_{k,l}` (or `E_{k,k}`) against its closed form.
#[allow(clippy::too_many_arguments)]
pub fn moment_matrix_check<E: ShardExecutor>(
    dist: &Distribution,
    m: usize,
    p: usize,
    k: usize,
    l: usize,
    trials: usize,
    seed: u64,
    executor: &E,
) -> Result<MomentCheckReport> {
    let (target, expected) = if k == l {
        (CheckTarget::Ekk, closed_form_ekk(dist, m, p, k)?)
    } else {
        (CheckTarget::Ekl, closed_form_ekl(dist, m, p, k, l)?)
    };
    let mc = monte_carlo_ekl(dist, m, p, k, l, trials, seed, executor)?;
    let label = format!("{target:?} {dist} m={m} p={p} k={k} l={l}");
    Ok(report(
        target,
        label,
        seed,
        trials,
        compare(p, &expected, &mc, false),
    ))
}

/// Monte Carlo mean of `R Rᵀ x xᵀ R Rᵀ` against its closed form.
pub fn single_sample_expectation_check<E: ShardExecutor>(
    dist: &Distribution,
    m: usize,
    x: &[f64],
    trials: usize,
    seed: u64,
    executor: &E,
) -> Result<MomentCheckReport> {
    check_trials(trials, MIN_MOMENT_TRIALS)?;
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroSample);
    }
    let p = x.len();
    let spec = ProjectionSpec::new(*dist, p, m, seed)?;
    let expected = closed_form_single_sample(dist, m, x)?;
    let stats = run_sharded(executor, trials, p * p, |t, stats| {
        let g = gram(&spec, t).expect("spec validated");
        let z: Vec<f64> = (0..p)
            .map(|i| (0..p).map(|j| g[i * p + j] * x[j]).sum())
            .collect();
        let mut outer = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..p {
                outer[a * p + b] = z[a] * z[b];
            }
        }
        stats.push(&outer);
    });
    let mc: MonteCarloEstimate = stats.into();
    let label = format!("single-sample {dist} m={m} p={p}");
    Ok(report(
        CheckTarget::SingleSampleExpectation,
        label,
        seed,
        trials,
        compare(p, expected.as_slice(), &mc, true),
    ))
}

/// Mean of the full biased estimator over independent master seeds against
/// `C + κ/(m+1) diag(C) + tr(C)/(m+1) I`; also reports how close the mean
/// unbiased estimate is to `C`.
pub fn estimator_mean_check<E: ShardExecutor>(
    dist: &Distribution,
    m: usize,
    data: &Dataset,
    trials: usize,
    seed: u64,
    executor: &E,
) -> Result<MomentCheckReport> {
    check_trials(trials, MIN_ESTIMATOR_TRIALS)?;
    let p = data.p();
    let base = ProjectionSpec::new(*dist, p, m, seed)?;
    let kappa = base.moments().kappa;
    let c_n = data.sample_covariance();
    let expected = expected_biased(&c_n, kappa, m);
    crate::estimator::bias_coefficients(kappa, m, p)?;

    let stats = run_sharded(executor, trials, 2 * p * p, |t, stats| {
        let spec = base.with_master_seed(derive_seed(seed, t as u64));
        let sketches = sketch_dataset(&spec, data.iter()).expect("validated data");
        let biased = accumulate_sketches(&sketches)
            .and_then(|acc| acc.finalize_biased())
            .expect("validated spec");
        let unbiased = debias(&biased).expect("coefficients checked");
        let mut row = Vec::with_capacity(2 * p * p);
        row.extend_from_slice(biased.matrix.as_slice());
        row.extend_from_slice(unbiased.matrix.as_slice());
        stats.push(&row);
    });
    let mc: MonteCarloEstimate = stats.into();
    let biased_mc = MonteCarloEstimate {
        trials: mc.trials,
        mean: mc.mean[..p * p].to_vec(),
        std_error: mc.std_error[..p * p].to_vec(),
    };
    let biased_mean = SymMatrix::from_row_major(p, biased_mc.mean.clone())?;
    let unbiased_mean = SymMatrix::from_row_major(p, mc.mean[p * p..].to_vec())?;
    let target_norm = spectral_norm(&c_n)?;
    if target_norm == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let label = format!("estimator mean {dist} m={m} p={p} n={}", data.n());
    let mut out = report(
        CheckTarget::FullEstimatorExpectation,
        label,
        seed,
        trials,
        compare(p, expected.as_slice(), &biased_mc, true),
    );
    out.biased_mean_relative_error = Some(spectral_norm(&biased_mean.sub(&c_n)?)? / target_norm);
    out.unbiased_mean_relative_error =
        Some(spectral_norm(&unbiased_mean.sub(&c_n)?)? / target_norm);
    Ok(out)
}

/// One entry of a verification grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    MomentMatrix {
        dist: Distribution,
        m: usize,
        p: usize,
        k: usize,
        l: usize,
    },
    SingleSample {
        dist: Distribution,
        m: usize,
        x: Vec<f64>,
    },
    Estimator {
        dist: Distribution,
        m: usize,
        data: Dataset,
    },
}

impl Check {
    pub fn min_trials(&self) -> usize {
        match self {
            Check::Estimator { .. } => MIN_ESTIMATOR_TRIALS,
            _ => MIN_MOMENT_TRIALS,
        }
    }

    pub fn run<E: ShardExecutor>(
        &self,
        trials: usize,
        seed: u64,
        executor: &E,
    ) -> Result<MomentCheckReport> {
        match self {
            Check::MomentMatrix { dist, m, p, k, l } => {
                moment_matrix_check(dist, *m, *p, *k, *l, trials, seed, executor)
            }
            Check::SingleSample { dist, m, x } => {
                single_sample_expectation_check(dist, *m, x, trials, seed, executor)
            }
            Check::Estimator { dist, m, data } => {
                estimator_mean_check(dist, *m, data, trials, seed, executor)
            }
        }
    }
}

/// The fixed dataset used by the default full-estimator check (`p = 8`,
/// `n = 4`, small integers so the closed form is exact).
pub fn default_estimator_data() -> Dataset {
    let samples = vec![
        3.0, -1.0, 0.0, 2.0, 1.0, 0.5, -2.0, 1.0, //
        1.0, 2.0, -1.0, 0.0, 3.0, -0.5, 1.0, 2.0, //
        -2.0, 0.0, 1.5, 1.0, -1.0, 2.0, 0.0, 1.0, //
        0.5, 1.0, 2.0, -3.0, 0.0, 1.0, 1.0, -1.0,
    ];
    Dataset::new(8, samples, "verify:fixed(p=8,n=4)").expect("static data")
}

/// Default verification grid: `E_{k,k}` and `E_{k,l}` for the Gaussian and
/// sparse-sign `s ∈ {1, 2, 3, 5}` families at `p ≤ 5`, `m ≤ 4`; one
/// single-sample check; one full-estimator check at `p = 8`, `n = 4`,
/// `s = 4`, `m = 3`. About 150 entries are tested in total, keeping the union
/// bound on a false failure under 1%.
pub fn default_grid() -> Vec<Check> {
    let dists = [
        Distribution::Gaussian,
        Distribution::SparseSign { s: 1.0 },
        Distribution::SparseSign { s: 2.0 },
        Distribution::SparseSign { s: 3.0 },
        Distribution::SparseSign { s: 5.0 },
    ];
    let mut grid = Vec::new();
    for dist in dists {
        let ekk = if dist == (Distribution::SparseSign { s: 5.0 }) {
            Check::MomentMatrix {
                dist,
                m: 4,
                p: 5,
                k: 3,
                l: 3,
            }
        } else {
            Check::MomentMatrix {
                dist,
                m: 2,
                p: 3,
                k: 1,
                l: 1,
            }
        };
        grid.push(ekk);
        grid.push(Check::MomentMatrix {
            dist,
            m: 2,
            p: 3,
            k: 0,
            l: 2,
        });
    }
    grid.push(Check::SingleSample {
        dist: Distribution::SparseSign { s: 5.0 },
        m: 3,
        x: vec![1.0, -2.0, 0.5, 3.0],
    });
    grid.push(Check::Estimator {
        dist: Distribution::SparseSign { s: 4.0 },
        m: 3,
        data: default_estimator_data(),
    });
    grid
}
