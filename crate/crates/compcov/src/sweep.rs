//! Error and timing sweeps over the compression factor `γ = m/s`.

use std::path::Path;
use std::time::Instant;

use compcov_core::estimator::debias;
use compcov_core::oracle::ShardExecutor;
use compcov_core::sketch::Backprojector;
use compcov_core::{
    derive_seed, sketch_dataset, spectral_norm, stable_rank, CovAccumulator, CovEstimate, Dataset,
    Distribution, EstimateKind, ProjectedSample, ProjectionSpec, SketchSet, SymMatrix,
};
use serde::{Deserialize, Serialize};

use crate::io::create;
use crate::{Error, Result};

pub const DEFAULT_M_RATIO: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementCount {
    Absolute(usize),
    /// `m = round(ratio · p)`, clamped to `[1, p − 1]`.
    Ratio(f64),
}

impl MeasurementCount {
    pub fn resolve(&self, p: usize) -> Result<usize> {
        match *self {
            MeasurementCount::Absolute(m) if m >= 1 && m < p => Ok(m),
            MeasurementCount::Absolute(m) => Err(Error::Usage(format!(
                "m = {m} violates the requirement 1 <= m < p = {p}"
            ))),
            MeasurementCount::Ratio(r) if r > 0.0 && r < 1.0 && p >= 2 => {
                Ok(((r * p as f64).round() as usize).clamp(1, p - 1))
            }
            MeasurementCount::Ratio(r) => Err(Error::Usage(format!(
                "m/p ratio {r} must lie in (0, 1) with p >= 2"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub m: MeasurementCount,
    pub gammas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub kinds: Vec<EstimateKind>,
    /// Measure wall times and normalize them by the dense `C_n` build.
    pub timing: bool,
}

impl SweepConfig {
    pub fn new(gammas: Vec<f64>, trials: usize, seed: u64) -> Self {
        Self {
            m: MeasurementCount::Ratio(DEFAULT_M_RATIO),
            gammas,
            trials,
            seed,
            kinds: vec![EstimateKind::Biased, EstimateKind::Unbiased],
            timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() {
            return Err(Error::Usage("at least one gamma value is required".into()));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::Usage(format!(
                "gamma values must be positive, got {g}"
            )));
        }
        if self.trials == 0 {
            return Err(Error::Usage("trials must be at least 1".into()));
        }
        if self.kinds.is_empty() {
            return Err(Error::Usage(
                "at least one estimate kind is required".into(),
            ));
        }
        Ok(())
    }

    /// Master seed for trial `trial` of the `gamma_index`-th γ.
    pub fn trial_seed(&self, gamma_index: usize, trial: usize) -> u64 {
        derive_seed(derive_seed(self.seed, gamma_index as u64), trial as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub source: String,
    pub p: usize,
    pub n: usize,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub mean_wall_time_seconds: f64,
    pub std_wall_time_seconds: f64,
    /// Mean wall time divided by the dense `C_n` build time.
    pub mean_normalized_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub gamma: f64,
    pub s: f64,
    pub kind: EstimateKind,
    pub trials_completed: usize,
    pub mean_error: Option<f64>,
    /// Sample standard deviation over trials.
    pub std_error: Option<f64>,
    pub min_error: Option<f64>,
    pub max_error: Option<f64>,
    pub mean_projected_nnz: Option<f64>,
    pub errors: Vec<f64>,
    pub seeds: Vec<u64>,
    pub failures: Vec<TrialFailure>,
    pub timing: Option<CellTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingBaseline {
    pub dense_build_seconds: f64,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub version: u32,
    pub dataset: DatasetInfo,
    pub seed: u64,
    pub m: usize,
    pub m_request: MeasurementCount,
    pub trials: usize,
    pub gammas: Vec<f64>,
    pub kinds: Vec<EstimateKind>,
    pub reference_spectral_norm: f64,
    pub stable_rank_reference: f64,
    pub cells: Vec<SweepCell>,
    pub timing: Option<TimingBaseline>,
}

impl SweepReport {
    pub fn cell(&self, gamma: f64, kind: EstimateKind) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.gamma == gamma && c.kind == kind)
    }
}

/// Result of one estimator build from existing sketches.
#[derive(Debug, Clone)]
pub struct TimedBuild {
    pub biased: CovEstimate,
    pub unbiased: Option<CovEstimate>,
    pub biased_seconds: f64,
    pub unbiased_seconds: f64,
    pub mean_projected_nnz: f64,
}

/// Regenerates each `R_i`, back-projects, accumulates and finalizes, timing
/// the whole estimator construction. The debias step is timed on top.
pub fn timed_build(sketches: &SketchSet, want_unbiased: bool) -> Result<TimedBuild> {
    let start = Instant::now();
    let spec = *sketches.spec();
    let mut acc = CovAccumulator::new(spec);
    let mut backprojector = Backprojector::new(spec.p());
    let mut z = ProjectedSample::new(spec.p());
    let mut nnz = 0usize;
    for (i, y) in sketches.iter().enumerate() {
        let r = spec.generate(i as u64)?;
        backprojector.apply(&r, y, &mut z)?;
        nnz += z.nnz();
        acc.accumulate(&z)?;
    }
    let mut biased = acc.into_biased()?;
    let biased_seconds = start.elapsed().as_secs_f64();
    biased.wall_time_seconds = biased_seconds;
    let (unbiased, unbiased_seconds) = if want_unbiased {
        let mut u = debias(&biased)?;
        let t = start.elapsed().as_secs_f64();
        u.wall_time_seconds = t;
        (Some(u), t)
    } else {
        (None, biased_seconds)
    };
    Ok(TimedBuild {
        biased,
        unbiased,
        biased_seconds,
        unbiased_seconds,
        mean_projected_nnz: nnz as f64 / sketches.n() as f64,
    })
}

/// Dense `C_n` build time after one warm-up run.
pub fn dense_build_seconds(ds: &Dataset) -> f64 {
    std::hint::black_box(ds.sample_covariance());
    let start = Instant::now();
    std::hint::black_box(ds.sample_covariance());
    start.elapsed().as_secs_f64()
}

struct TrialOutcome {
    errors: Vec<f64>,
    seconds: Vec<f64>,
    nnz: f64,
}

fn run_trial(
    ds: &Dataset,
    reference: &SymMatrix,
    reference_norm: f64,
    spec: &ProjectionSpec,
    kinds: &[EstimateKind],
) -> Result<TrialOutcome> {
    let sketches = sketch_dataset(spec, ds.iter())?;
    let build = timed_build(&sketches, kinds.contains(&EstimateKind::Unbiased))?;
    let mut errors = Vec::with_capacity(kinds.len());
    let mut seconds = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let (est, t) = match kind {
            EstimateKind::Biased => (&build.biased, build.biased_seconds),
            EstimateKind::Unbiased => (
                build.unbiased.as_ref().expect("unbiased requested"),
                build.unbiased_seconds,
            ),
        };
        errors.push(spectral_norm(&est.matrix.sub(reference)?)? / reference_norm);
        seconds.push(t);
    }
    Ok(TrialOutcome {
        errors,
        seconds,
        nnz: build.mean_projected_nnz,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every `(γ, trial)` pair through the executor and aggregates in
/// index order. Failing trials are recorded and the sweep continues.
pub fn run_sweep<E: ShardExecutor>(
    ds: &Dataset,
    reference: &SymMatrix,
    config: &SweepConfig,
    executor: &E,
    jobs: usize,
) -> Result<SweepReport> {
    config.validate()?;
    let p = ds.p();
    if reference.dim() != p {
        return Err(compcov_core::Error::DimensionMismatch {
            expected: p,
            found: reference.dim(),
        }
        .into());
    }
    let m = config.m.resolve(p)?;
    let reference_norm = spectral_norm(reference)?;
    if reference_norm == 0.0 {
        return Err(compcov_core::Error::ZeroMatrix.into());
    }
    let stable_rank_reference = stable_rank(reference)?;
    let dense_seconds = config.timing.then(|| dense_build_seconds(ds));

    // One spec per gamma, so invalid cells and gamma >= 1 warnings show up
    // once rather than per trial.
    let bases: Vec<_> = config
        .gammas
        .iter()
        .map(|&gamma| {
            ProjectionSpec::new(
                Distribution::SparseSign {
                    s: m as f64 / gamma,
                },
                p,
                m,
                0,
            )
        })
        .collect();
    let trials = config.trials;
    let total = config.gammas.len() * trials;
    let outcomes = executor.map(total, |job| -> Result<TrialOutcome> {
        let (g, t) = (job / trials, job % trials);
        let spec = bases[g].clone()?.with_master_seed(config.trial_seed(g, t));
        run_trial(ds, reference, reference_norm, &spec, &config.kinds)
    });

    let mut cells = Vec::new();
    for (g, &gamma) in config.gammas.iter().enumerate() {
        let slice = &outcomes[g * trials..(g + 1) * trials];
        for (k, &kind) in config.kinds.iter().enumerate() {
            let mut errors = Vec::new();
            let mut seconds = Vec::new();
            let mut nnz = Vec::new();
            let mut seeds = Vec::new();
            let mut failures = Vec::new();
            for (t, outcome) in slice.iter().enumerate() {
                let seed = config.trial_seed(g, t);
                seeds.push(seed);
                match outcome {
                    Ok(o) => {
                        errors.push(o.errors[k]);
                        seconds.push(o.seconds[k]);
                        nnz.push(o.nnz);
                    }
                    Err(e) => failures.push(TrialFailure {
                        trial: t,
                        seed,
                        message: e.to_string(),
                    }),
                }
            }
            let stats = (!errors.is_empty()).then(|| mean_std(&errors));
            let timing = match (dense_seconds, seconds.is_empty()) {
                (Some(dense), false) => {
                    let (mean, std) = mean_std(&seconds);
                    Some(CellTiming {
                        mean_wall_time_seconds: mean,
                        std_wall_time_seconds: std,
                        mean_normalized_time: mean / dense.max(f64::MIN_POSITIVE),
                    })
                }
                _ => None,
            };
            cells.push(SweepCell {
                gamma,
                s: m as f64 / gamma,
                kind,
                trials_completed: errors.len(),
                mean_error: stats.map(|s| s.0),
                std_error: stats.map(|s| s.1),
                min_error: errors.iter().copied().reduce(f64::min),
                max_error: errors.iter().copied().reduce(f64::max),
                mean_projected_nnz: (!nnz.is_empty()).then(|| mean_std(&nnz).0),
                errors,
                seeds,
                failures,
                timing,
            });
        }
    }
    for cell in &cells {
        if let Some(f) = cell.failures.first() {
            log::warn!(
                "gamma = {}: {} of {} trials failed ({})",
                cell.gamma,
                cell.failures.len(),
                trials,
                f.message
            );
        }
    }

    Ok(SweepReport {
        version: 1,
        dataset: DatasetInfo {
            source: ds.source().to_owned(),
            p,
            n: ds.n(),
            content_hash: crate::reference::content_hash(ds),
        },
        seed: config.seed,
        m,
        m_request: config.m,
        trials,
        gammas: config.gammas.clone(),
        kinds: config.kinds.clone(),
        reference_spectral_norm: reference_norm,
        stable_rank_reference,
        cells,
        timing: dense_seconds.map(|d| TimingBaseline {
            dense_build_seconds: d,
            jobs,
        }),
    })
}

/// One row per `(γ, kind)` cell.
pub fn write_csv<W: std::io::Write>(w: W, report: &SweepReport) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Usage(format!("csv write failed: {e}"));
    wtr.write_record([
        "gamma",
        "s",
        "kind",
        "trials_completed",
        "mean_error",
        "std_error",
        "mean_projected_nnz",
        "mean_wall_time_seconds",
        "mean_normalized_time",
        "failures",
    ])
    .map_err(err)?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
    for c in &report.cells {
        wtr.write_record([
            format!("{}", c.gamma),
            format!("{}", c.s),
            format!("{:?}", c.kind),
            c.trials_completed.to_string(),
            opt(c.mean_error),
            opt(c.std_error),
            opt(c.mean_projected_nnz),
            opt(c.timing.as_ref().map(|t| t.mean_wall_time_seconds)),
            opt(c.timing.as_ref().map(|t| t.mean_normalized_time)),
            c.failures.len().to_string(),
        ])
        .map_err(err)?;
    }
    wtr.flush()
        .map_err(|e| Error::Usage(format!("csv write failed: {e}")))
}

/// Writes `<out>` as JSON and the same path with a `.csv` extension.
pub fn save(out: &Path, report: &SweepReport) -> Result<std::path::PathBuf> {
    let mut w = create(out)?;
    serde_json::to_writer_pretty(&mut w, report)?;
    std::io::Write::flush(&mut w).map_err(|e| Error::io(out, e))?;
    let csv_path = out.with_extension("csv");
    write_csv(create(&csv_path)?, report)?;
    Ok(csv_path)
}
