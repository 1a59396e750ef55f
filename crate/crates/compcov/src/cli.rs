//! Argument definitions and subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use compcov_core::oracle::default_grid;
use compcov_core::{
    sketch_dataset, top_eigenvectors, Dataset, Distribution, EstimateKind, ProjectionSpec,
    SynthModel, SynthSpec,
};

use crate::ingest::{extension, load_dataset, load_synth_spec, Orientation};
use crate::io::{csv_data, eigvec, estimate_file, matrix_market, sketch_file};
use crate::parallel::RayonExecutor;
use crate::reference::reference_covariance;
use crate::sweep::{run_sweep, MeasurementCount, SweepConfig, DEFAULT_M_RATIO};
use crate::verify::run_verify;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "compcov",
    version,
    about = "Covariance estimation from sparse random projections"
)]
pub struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Only print errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress a dataset into a sketch file.
    Sketch(SketchArgs),
    /// Estimate the covariance from a sketch file.
    Estimate(EstimateArgs),
    /// Error and timing sweep over the compression factor.
    Sweep(SweepArgs),
    /// Export top eigenvectors of a covariance matrix.
    Eigvec(EigvecArgs),
    /// Run the Monte Carlo oracle grid.
    Verify(VerifyArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Dataset file (.mtx or .csv).
    #[arg(long)]
    pub input: PathBuf,

    /// Treat rows as samples (default for CSV).
    #[arg(long, conflicts_with = "samples_cols")]
    pub samples_rows: bool,

    /// Treat columns as samples (default for Matrix Market).
    #[arg(long)]
    pub samples_cols: bool,
}

impl DatasetArgs {
    fn orientation(&self) -> Orientation {
        let csv = extension(&self.input) == "csv";
        match (self.samples_rows, self.samples_cols) {
            (true, _) if !csv => Orientation::Transposed,
            (_, true) if csv => Orientation::Transposed,
            _ => Orientation::Native,
        }
    }

    pub fn load(&self, quiet: bool) -> Result<Dataset> {
        let ds = load_dataset(&self.input, self.orientation())?;
        if !quiet {
            eprintln!(
                "{}: p = {}, n = {} ({} are samples)",
                self.input.display(),
                ds.p(),
                ds.n(),
                match (extension(&self.input) == "csv", self.orientation()) {
                    (true, Orientation::Native) | (false, Orientation::Transposed) => "rows",
                    _ => "columns",
                }
            );
        }
        Ok(ds)
    }
}

#[derive(Debug, Args)]
pub struct SketchArgs {
    #[command(flatten)]
    pub data: DatasetArgs,

    /// Measurements per sample.
    #[arg(long)]
    pub m: usize,

    /// Sparse-sign sparsity (expected 1/s nonzero fraction).
    #[arg(
        long,
        required_unless_present = "gaussian",
        conflicts_with = "gaussian"
    )]
    pub s: Option<f64>,

    /// Use dense Gaussian projections instead.
    #[arg(long)]
    pub gaussian: bool,

    /// Sketch file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Sketch file written by `sketch`.
    #[arg(long)]
    pub sketch: PathBuf,

    /// Output Matrix Market file; the sidecar goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,

    /// Write the biased estimate.
    #[arg(long, conflicts_with = "unbiased")]
    pub biased: bool,

    /// Write the bias-corrected estimate (default).
    #[arg(long)]
    pub unbiased: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Biased,
    Unbiased,
}

impl From<KindArg> for EstimateKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Biased => EstimateKind::Biased,
            KindArg::Unbiased => EstimateKind::Unbiased,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Dataset file (.mtx or .csv).
    #[arg(long, required_unless_present = "synth", conflicts_with = "synth")]
    pub input: Option<PathBuf>,

    /// Synthetic dataset spec (JSON) instead of a file.
    #[arg(long)]
    pub synth: Option<PathBuf>,

    /// Treat rows as samples (default for CSV).
    #[arg(long, conflicts_with = "samples_cols")]
    pub samples_rows: bool,

    /// Treat columns as samples (default for Matrix Market).
    #[arg(long)]
    pub samples_cols: bool,

    /// Measurements per sample (overrides --m-ratio).
    #[arg(long)]
    pub m: Option<usize>,

    /// Measurements per sample as a fraction of p.
    #[arg(long, default_value_t = DEFAULT_M_RATIO)]
    pub m_ratio: f64,

    /// Compression factors gamma = m/s.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
    pub gammas: Vec<f64>,

    /// Independent trials per gamma, each with its own seed.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,

    /// Estimate kinds to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "biased,unbiased")]
    pub kinds: Vec<KindArg>,

    /// JSON report path; a CSV is written next to it.
    #[arg(long)]
    pub out: PathBuf,

    /// Skip wall-time measurement.
    #[arg(long)]
    pub no_timing: bool,

    /// Do not read or write the reference covariance cache.
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Debug, Args)]
pub struct EigvecArgs {
    /// Covariance matrix (Matrix Market).
    #[arg(long)]
    pub input: PathBuf,

    /// Number of leading eigenvectors.
    #[arg(long, default_value_t = 1)]
    pub k: usize,

    /// CSV output, one column per eigenvector.
    #[arg(long)]
    pub out: PathBuf,

    /// PGM output of the leading eigenvector (needs --dims).
    #[arg(long, requires = "dims")]
    pub pgm: Option<PathBuf>,

    /// Image size WIDTHxHEIGHT; must multiply to p.
    #[arg(long)]
    pub dims: Option<String>,

    /// JSON spectrum summary.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Trials per check (default 100000, or 20000 for the estimator check).
    #[arg(long)]
    pub trials: Option<usize>,

    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Spiked,
    StableRank,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON spec; overrides the model flags.
    #[arg(long, conflicts_with = "model")]
    pub spec: Option<PathBuf>,

    #[arg(long, required_unless_present = "spec")]
    pub model: Option<ModelArg>,

    /// Spike strengths for the spiked model.
    #[arg(long, value_delimiter = ',')]
    pub spikes: Vec<f64>,

    /// Isotropic noise level for the spiked model.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,

    /// Target stable rank for the stable-rank model.
    #[arg(long)]
    pub beta: Option<f64>,

    /// Dimension.
    #[arg(long, required_unless_present = "spec")]
    pub p: Option<usize>,

    /// Number of samples.
    #[arg(long, required_unless_present = "spec")]
    pub n: Option<usize>,

    /// Output file (.mtx, columns are samples; or .csv, rows are samples).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Sketch(a) => cmd_sketch(&a, cli.seed, quiet),
        Command::Estimate(a) => cmd_estimate(&a, quiet),
        Command::Sweep(a) => cmd_sweep(&a, cli.seed, cli.jobs, quiet),
        Command::Eigvec(a) => cmd_eigvec(&a, quiet),
        Command::Verify(a) => cmd_verify(&a, cli.seed, cli.jobs),
        Command::Synth(a) => cmd_synth(&a, cli.seed, quiet),
    }
}

fn dimension_error(e: compcov_core::Error) -> Error {
    match e {
        compcov_core::Error::InvalidDimensions { p, m } => Error::Usage(format!(
            "--m {m} is invalid: the measurement count must satisfy 1 <= m < p (p = {p})"
        )),
        other => other.into(),
    }
}

pub fn cmd_sketch(a: &SketchArgs, seed: u64, quiet: bool) -> Result<()> {
    let ds = a.data.load(quiet)?;
    let dist = match a.s {
        Some(s) => Distribution::SparseSign { s },
        None => Distribution::Gaussian,
    };
    let spec = ProjectionSpec::new(dist, ds.p(), a.m, seed).map_err(dimension_error)?;
    let sketches = sketch_dataset(&spec, ds.iter())?;
    sketch_file::save(&a.out, &sketches)?;
    if !quiet {
        eprintln!(
            "wrote {} sketches of length {} with {dist} to {}",
            sketches.n(),
            spec.m(),
            a.out.display()
        );
    }
    Ok(())
}

pub fn cmd_estimate(a: &EstimateArgs, quiet: bool) -> Result<()> {
    let sketches = sketch_file::load(&a.sketch)?;
    let kind = if a.biased {
        EstimateKind::Biased
    } else {
        EstimateKind::Unbiased
    };
    let start = std::time::Instant::now();
    let est = compcov_core::estimate_with_clock(&sketches, kind, || start.elapsed().as_secs_f64())?;
    estimate_file::save(&a.out, &est)?;
    if !quiet {
        eprintln!(
            "wrote {kind:?} estimate (p = {}, n = {}) to {} in {:.3}s",
            est.params.p,
            est.params.n,
            a.out.display(),
            est.wall_time_seconds
        );
    }
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs, seed: u64, jobs: Option<usize>, quiet: bool) -> Result<()> {
    let (ds, cache_key): (Dataset, Option<PathBuf>) = match (&a.input, &a.synth) {
        (Some(input), _) => {
            let args = DatasetArgs {
                input: input.clone(),
                samples_rows: a.samples_rows,
                samples_cols: a.samples_cols,
            };
            (args.load(quiet)?, Some(input.clone()))
        }
        (None, Some(spec_path)) => {
            let ds = load_synth_spec(spec_path)?.generate()?;
            if !quiet {
                eprintln!("{}: p = {}, n = {}", spec_path.display(), ds.p(), ds.n());
            }
            (ds, None)
        }
        (None, None) => return Err(Error::Usage("sweep needs --input or --synth".into())),
    };
    let mut config = SweepConfig::new(a.gammas.clone(), a.trials, seed);
    config.m = match a.m {
        Some(m) => MeasurementCount::Absolute(m),
        None => MeasurementCount::Ratio(a.m_ratio),
    };
    config.kinds = a.kinds.iter().map(|&k| k.into()).collect();
    config.timing = !a.no_timing;
    config.validate()?;

    let cache = if a.no_cache {
        None
    } else {
        cache_key.as_deref()
    };
    let reference = reference_covariance(&ds, cache);
    let executor = RayonExecutor::new(jobs)?;
    let report = run_sweep(&ds, &reference, &config, &executor, executor.threads())?;
    let csv_path = crate::sweep::save(&a.out, &report)?;
    if !quiet {
        for c in &report.cells {
            eprintln!(
                "gamma = {:<6} {:<9} error = {}",
                c.gamma,
                format!("{:?}", c.kind),
                c.mean_error
                    .map_or_else(|| "failed".to_owned(), |e| format!("{e:.4}")),
            );
        }
        eprintln!("wrote {} and {}", a.out.display(), csv_path.display());
    }
    Ok(())
}

pub fn cmd_eigvec(a: &EigvecArgs, quiet: bool) -> Result<()> {
    let c = matrix_market::load_symmetric(&a.input)?;
    let dims = a.dims.as_deref().map(eigvec::parse_dims).transpose()?;
    if let Some((w, h)) = dims {
        eigvec::check_dims(w, h, c.dim())?;
    }
    let summary = top_eigenvectors(&c, a.k)?;
    eigvec::save_csv(&a.out, &summary)?;
    if let (Some(pgm), Some((w, h))) = (&a.pgm, dims) {
        eigvec::save_pgm(pgm, &summary.eigenvectors[0], w, h)?;
    }
    if let Some(path) = &a.summary {
        let mut value = serde_json::to_value(&summary)?;
        value["version"] = 1.into();
        write_json(path, &value)?;
    }
    if !quiet {
        eprintln!(
            "top {} eigenvalues {:?}, stable rank {:.4}",
            a.k, summary.eigenvalues, summary.stable_rank
        );
    }
    Ok(())
}

pub fn cmd_verify(a: &VerifyArgs, seed: u64, jobs: Option<usize>) -> Result<()> {
    let executor = RayonExecutor::new(jobs)?;
    let report = run_verify(&default_grid(), a.trials, seed, &executor)?;
    match &a.out {
        Some(path) => write_json(path, &report)?,
        None => {
            let mut out = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out).map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    if report.passed {
        Ok(())
    } else {
        Err(Error::VerificationFailed {
            failed: report.checks_failed,
            total: report.checks.len(),
        })
    }
}

pub fn synth_spec(a: &SynthArgs, seed: u64) -> Result<SynthSpec> {
    if let Some(path) = &a.spec {
        return load_synth_spec(path);
    }
    let missing = |what: &str| Error::Usage(format!("synth needs {what}"));
    let model = match a.model.ok_or_else(|| missing("--model"))? {
        ModelArg::Spiked => SynthModel::Spiked {
            spikes: a.spikes.clone(),
            sigma: a.sigma,
        },
        ModelArg::StableRank => SynthModel::StableRank {
            beta: a
                .beta
                .ok_or_else(|| missing("--beta for the stable-rank model"))?,
        },
    };
    let spec = SynthSpec {
        model,
        p: a.p.ok_or_else(|| missing("--p"))?,
        n: a.n.ok_or_else(|| missing("--n"))?,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn cmd_synth(a: &SynthArgs, seed: u64, quiet: bool) -> Result<()> {
    let ds = synth_spec(a, seed)?.generate()?;
    save_dataset(&a.out, &ds)?;
    if !quiet {
        eprintln!(
            "wrote p = {}, n = {} to {}",
            ds.p(),
            ds.n(),
            a.out.display()
        );
    }
    Ok(())
}

/// `.csv` gets one row per sample; anything else a Matrix Market array with
/// one column per sample.
pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    if extension(path) == "csv" {
        csv_data::save_csv(path, ds)
    } else {
        matrix_market::save_dataset(path, ds)
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = crate::io::create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
