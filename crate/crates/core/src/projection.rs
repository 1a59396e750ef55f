//! Reproducible random projection matrices.
//!
//! A [`ProjectionSpec`] together with a sample index fully determines the
//! matrix `R_i`, so sketches never need to store it. The generator is part of
//! the on-disk contract:
//!
//! * the stream is `ChaCha8Rng::seed_from_u64(master_seed)` with
//!   `set_stream(sample_index)`;
//! * uniforms are `(next_u64() >> 11) · 2⁻⁵³`, signs are `next_u32() & 1`
//!   (`1` means `-1`);
//! * sparse-sign entries are visited in column-major order; the distance to the
//!   next nonzero entry is geometric, drawn as `⌊ln(1 - u) / ln(1 - 1/s)⌋`
//!   followed by one sign draw (for `s == 1` every entry takes one sign draw);
//! * Gaussian entries are `rand_distr::StandardNormal`, column-major.
//!
//! Logarithms come from `libm`, so matrices are bit-identical across
//! platforms.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Entry distribution of the projection matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// Entries in `{-1, 0, +1}` with probabilities `{1/2s, 1 - 1/s, 1/2s}`.
    SparseSign { s: f64 },
    /// Standard normal entries.
    Gaussian,
}

/// Second moment, fourth moment and kurtosis of a zero-mean distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mu2: f64,
    pub mu4: f64,
    pub kappa: f64,
}

impl Distribution {
    pub fn sparse_sign(s: f64) -> Result<Self> {
        let dist = Distribution::SparseSign { s };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::SparseSign { s } if !(s.is_finite() && s >= 1.0) => {
                Err(Error::InvalidSparsity(s))
            }
            _ => Ok(()),
        }
    }

    pub fn sparsity(&self) -> Option<f64> {
        match *self {
            Distribution::SparseSign { s } => Some(s),
            Distribution::Gaussian => None,
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::SparseSign { s } => write!(f, "sparse_sign(s={s})"),
            Distribution::Gaussian => f.write_str("gaussian"),
        }
    }
}

/// Closed-form moments of `dist`.
pub fn moments(dist: &Distribution) -> Result<Moments> {
    dist.validate()?;
    Ok(match *dist {
        Distribution::Gaussian => Moments {
            mu2: 1.0,
            mu4: 3.0,
            kappa: 0.0,
        },
        Distribution::SparseSign { s } => Moments {
            mu2: 1.0 / s,
            mu4: 1.0 / s,
            kappa: s - 3.0,
        },
    })
}

/// Everything needed to regenerate `R_i` for any sample index `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct ProjectionSpec {
    dist: Distribution,
    p: usize,
    m: usize,
    master_seed: u64,
}

impl ProjectionSpec {
    pub fn new(dist: Distribution, p: usize, m: usize, master_seed: u64) -> Result<Self> {
        dist.validate()?;
        if m == 0 || m >= p {
            return Err(Error::InvalidDimensions { p, m });
        }
        let spec = Self {
            dist,
            p,
            m,
            master_seed,
        };
        if let Some(gamma) = spec.gamma() {
            if gamma >= 1.0 {
                log::warn!(
                    "compression factor gamma = m/s = {gamma} >= 1; estimates stay unbiased \
                     but the sparse cost advantage is lost"
                );
            }
        }
        Ok(spec)
    }

    pub fn dist(&self) -> Distribution {
        self.dist
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn with_master_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn moments(&self) -> Moments {
        // validated at construction
        moments(&self.dist).expect("validated distribution")
    }

    /// Compression factor `m / s`; only defined for the sparse family.
    pub fn gamma(&self) -> Option<f64> {
        self.dist.sparsity().map(|s| self.m as f64 / s)
    }

    /// Regenerates `R_i`.
    pub fn generate(&self, sample_index: u64) -> Result<Projection> {
        if sample_index >= 1u64 << 63 {
            return Err(Error::SampleIndexOutOfRange(sample_index));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(sample_index);
        Ok(match self.dist {
            Distribution::SparseSign { s } => {
                Projection::Sparse(generate_sparse(&mut rng, self.p, self.m, s))
            }
            Distribution::Gaussian => {
                let values = (0..self.p * self.m)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Projection::Dense(DenseProjection {
                    p: self.p,
                    m: self.m,
                    values,
                })
            }
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Family {
    SparseSign,
    Gaussian,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    family: Family,
    s: Option<f64>,
    p: usize,
    m: usize,
    master_seed: u64,
}

impl From<ProjectionSpec> for SpecRepr {
    fn from(spec: ProjectionSpec) -> Self {
        let (family, s) = match spec.dist {
            Distribution::SparseSign { s } => (Family::SparseSign, Some(s)),
            Distribution::Gaussian => (Family::Gaussian, None),
        };
        SpecRepr {
            family,
            s,
            p: spec.p,
            m: spec.m,
            master_seed: spec.master_seed,
        }
    }
}

impl TryFrom<SpecRepr> for ProjectionSpec {
    type Error = Error;

    fn try_from(repr: SpecRepr) -> Result<Self> {
        let dist = match (repr.family, repr.s) {
            (Family::SparseSign, Some(s)) => Distribution::SparseSign { s },
            (Family::SparseSign, None) => return Err(Error::InvalidSparsity(f64::NAN)),
            (Family::Gaussian, _) => Distribution::Gaussian,
        };
        ProjectionSpec::new(dist, repr.p, repr.m, repr.master_seed)
    }
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn random_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.next_u32() & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

fn generate_sparse(rng: &mut ChaCha8Rng, p: usize, m: usize, s: f64) -> SparseProjection {
    let total = p * m;
    let mut col_ptr = vec![0usize; m + 1];
    let mut rows = Vec::with_capacity(((total as f64 / s) * 1.2) as usize + 8);
    let mut values = Vec::with_capacity(rows.capacity());

    if s == 1.0 {
        for col in 0..m {
            for row in 0..p {
                rows.push(row as u32);
                values.push(random_sign(rng));
            }
            col_ptr[col + 1] = rows.len();
        }
        return SparseProjection {
            p,
            m,
            col_ptr,
            rows,
            values,
        };
    }

    // ln(1 - 1/s) < 0
    let log_keep = libm::log1p(-1.0 / s);
    let mut pos = 0usize;
    let mut col = 0usize;
    loop {
        let u = 1.0 - unit_uniform(rng);
        let gap = libm::floor(libm::log(u) / log_keep);
        if gap >= (total - pos) as f64 {
            break;
        }
        pos += gap as usize;
        let c = pos / p;
        while col < c {
            col += 1;
            col_ptr[col] = rows.len();
        }
        rows.push((pos - c * p) as u32);
        values.push(random_sign(rng));
        pos += 1;
        if pos >= total {
            break;
        }
    }
    while col < m {
        col += 1;
        col_ptr[col] = rows.len();
    }
    SparseProjection {
        p,
        m,
        col_ptr,
        rows,
        values,
    }
}

/// A `p × m` matrix with entries in `{-1, 0, +1}`, compressed by column.
///
/// Values are the unscaled signs; the `1/√s`-type scale never appears because
/// the estimator carries it through `μ₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseProjection {
    p: usize,
    m: usize,
    col_ptr: Vec<usize>,
    rows: Vec<u32>,
    values: Vec<f64>,
}

impl SparseProjection {
    /// Builds a matrix from per-column `(row, value)` lists. Rows must be
    /// strictly increasing within a column and values must be `±1`.
    pub fn from_columns(p: usize, columns: &[&[(usize, f64)]]) -> Result<Self> {
        let m = columns.len();
        let mut col_ptr = Vec::with_capacity(m + 1);
        let mut rows = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for column in columns {
            let mut last: Option<usize> = None;
            for &(row, value) in column.iter() {
                if row >= p || last.is_some_and(|l| row <= l) {
                    return Err(Error::IndexOutOfRange { index: row, p });
                }
                if value != 1.0 && value != -1.0 {
                    return Err(Error::InvalidSparsity(value));
                }
                last = Some(row);
                rows.push(row as u32);
                values.push(value);
            }
            col_ptr.push(rows.len());
        }
        Ok(Self {
            p,
            m,
            col_ptr,
            rows,
            values,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    /// `(rows, values)` of column `j`.
    #[inline]
    pub fn column(&self, j: usize) -> (&[u32], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.rows[range.clone()], &self.values[range])
    }

    pub fn column_nnz(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }
}

/// A dense `p × m` matrix stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseProjection {
    p: usize,
    m: usize,
    values: Vec<f64>,
}

impl DenseProjection {
    pub fn from_column_major(p: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != p * m {
            return Err(Error::DimensionMismatch {
                expected: p * m,
                found: values.len(),
            });
        }
        Ok(Self { p, m, values })
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.p..(j + 1) * self.p]
    }
}

/// One realized projection matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Sparse(SparseProjection),
    Dense(DenseProjection),
}

impl Projection {
    pub fn p(&self) -> usize {
        match self {
            Projection::Sparse(r) => r.p,
            Projection::Dense(r) => r.p,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Projection::Sparse(r) => r.m,
            Projection::Dense(r) => r.m,
        }
    }

    /// Stored entries (all `p·m` for dense matrices).
    pub fn nnz(&self) -> usize {
        match self {
            Projection::Sparse(r) => r.nnz(),
            Projection::Dense(r) => r.values.len(),
        }
    }

    /// Column-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            Projection::Dense(r) => r.values.clone(),
            Projection::Sparse(r) => {
                let mut out = vec![0.0; r.p * r.m];
                for j in 0..r.m {
                    let (rows, values) = r.column(j);
                    for (&i, &v) in rows.iter().zip(values) {
                        out[j * r.p + i as usize] = v;
                    }
                }
                out
            }
        }
    }
}

/// Mixes `(seed, index)` into an independent 64-bit seed (SplitMix64 finalizer
/// applied twice).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(seed) ^ index)
}

/// Sample excess kurtosis of at least `num_entries` entries drawn from
/// consecutive matrices `R_0, R_1, …` of `spec` (zeros included).
pub fn empirical_kurtosis(spec: &ProjectionSpec, num_entries: usize) -> Result<f64> {
    const MIN_ENTRIES: usize = 10_000;
    if num_entries < MIN_ENTRIES {
        return Err(Error::TooFewEntries {
            min: MIN_ENTRIES,
            got: num_entries,
        });
    }
    let per_matrix = spec.p * spec.m;
    let mut entries = Vec::with_capacity(num_entries + per_matrix);
    let mut index = 0u64;
    while entries.len() < num_entries {
        entries.extend(spec.generate(index)?.to_dense());
        index += 1;
    }
    entries.truncate(num_entries);

    let n = entries.len() as f64;
    let mean = entries.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &v in &entries {
        let d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    Ok(m4 / (m2 * m2) - 3.0)
}
