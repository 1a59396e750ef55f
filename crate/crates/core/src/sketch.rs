//! Compressive measurements `y = Rᵀx` and back-projections `z = R y`.

use alloc::vec;
use alloc::vec::Vec;

use crate::projection::{Projection, ProjectionSpec};
use crate::{Error, Result};

/// The single-pass product of acquisition: `n` measurements of length `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchSet {
    spec: ProjectionSpec,
    n: usize,
    measurements: Vec<f64>,
}

impl SketchSet {
    /// `measurements` is the `n × m` row-major concatenation in sample order.
    pub fn new(spec: ProjectionSpec, measurements: Vec<f64>) -> Result<Self> {
        let m = spec.m();
        if measurements.is_empty() || !measurements.len().is_multiple_of(m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: measurements.len(),
            });
        }
        Ok(Self {
            spec,
            n: measurements.len() / m,
            measurements,
        })
    }

    pub fn spec(&self) -> &ProjectionSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn measurement(&self, i: usize) -> &[f64] {
        let m = self.spec.m();
        &self.measurements[i * m..(i + 1) * m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.measurements.chunks_exact(self.spec.m())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.measurements
    }
}

/// A sparse length-`p` vector with sorted, distinct indices and no stored
/// zeros.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProjectedSample {
    p: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl ProjectedSample {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Keeps the nonzero entries of a dense vector.
    pub fn from_dense(z: &[f64]) -> Self {
        let mut out = Self::new(z.len());
        for (i, &v) in z.iter().enumerate() {
            if v != 0.0 {
                out.indices.push(i);
                out.values.push(v);
            }
        }
        out
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }
}

/// `y = Rᵀx`, touching only the stored entries of `R`.
pub fn measure<T: Copy + Into<f64>>(r: &Projection, x: &[T]) -> Result<Vec<f64>> {
    let mut y = vec![0.0; r.m()];
    measure_into(r, x, &mut y)?;
    Ok(y)
}

pub fn measure_into<T: Copy + Into<f64>>(r: &Projection, x: &[T], y: &mut [f64]) -> Result<()> {
    if x.len() != r.p() {
        return Err(Error::DimensionMismatch {
            expected: r.p(),
            found: x.len(),
        });
    }
    if y.len() != r.m() {
        return Err(Error::DimensionMismatch {
            expected: r.m(),
            found: y.len(),
        });
    }
    match r {
        Projection::Sparse(sp) => {
            for (j, yj) in y.iter_mut().enumerate() {
                let (rows, values) = sp.column(j);
                *yj = rows
                    .iter()
                    .zip(values)
                    .map(|(&i, &v)| v * x[i as usize].into())
                    .sum();
            }
        }
        Projection::Dense(d) => {
            for (j, yj) in y.iter_mut().enumerate() {
                *yj = d.column(j).iter().zip(x).map(|(&a, &b)| a * b.into()).sum();
            }
        }
    }
    Ok(())
}

/// `z = R y` as a sparse vector.
pub fn backproject(r: &Projection, y: &[f64]) -> Result<ProjectedSample> {
    let mut out = ProjectedSample::new(r.p());
    Backprojector::new(r.p()).apply(r, y, &mut out)?;
    Ok(out)
}

/// Reusable scratch space for repeated back-projections of dimension `p`.
#[derive(Debug, Clone)]
pub struct Backprojector {
    dense: Vec<f64>,
    touched: Vec<bool>,
    support: Vec<usize>,
}

impl Backprojector {
    pub fn new(p: usize) -> Self {
        Self {
            dense: vec![0.0; p],
            touched: vec![false; p],
            support: Vec::new(),
        }
    }

    pub fn apply(&mut self, r: &Projection, y: &[f64], out: &mut ProjectedSample) -> Result<()> {
        let p = r.p();
        if y.len() != r.m() {
            return Err(Error::DimensionMismatch {
                expected: r.m(),
                found: y.len(),
            });
        }
        if self.dense.len() != p {
            *self = Self::new(p);
        }
        out.p = p;
        out.indices.clear();
        out.values.clear();

        match r {
            Projection::Sparse(sp) => {
                for (j, &yj) in y.iter().enumerate() {
                    if yj == 0.0 {
                        continue;
                    }
                    let (rows, values) = sp.column(j);
                    for (&i, &v) in rows.iter().zip(values) {
                        let i = i as usize;
                        if !self.touched[i] {
                            self.touched[i] = true;
                            self.support.push(i);
                        }
                        self.dense[i] += v * yj;
                    }
                }
                self.support.sort_unstable();
                for &i in &self.support {
                    let v = self.dense[i];
                    if v != 0.0 {
                        out.indices.push(i);
                        out.values.push(v);
                    }
                    self.dense[i] = 0.0;
                    self.touched[i] = false;
                }
                self.support.clear();
            }
            Projection::Dense(d) => {
                for (j, &yj) in y.iter().enumerate() {
                    for (acc, &a) in self.dense.iter_mut().zip(d.column(j)) {
                        *acc += a * yj;
                    }
                }
                for i in 0..p {
                    let v = self.dense[i];
                    if v != 0.0 {
                        out.indices.push(i);
                        out.values.push(v);
                    }
                    self.dense[i] = 0.0;
                }
            }
        }
        Ok(())
    }
}

/// One pass over `samples`: `measurements[i] = measure(generate(spec, i), x_i)`.
pub fn sketch_dataset<I, S, T>(spec: &ProjectionSpec, samples: I) -> Result<SketchSet>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[T]>,
    T: Copy + Into<f64>,
{
    let (p, m) = (spec.p(), spec.m());
    let mut measurements = Vec::new();
    for (index, sample) in samples.into_iter().enumerate() {
        let x = sample.as_ref();
        if x.len() != p {
            return Err(Error::SampleLength {
                index,
                expected: p,
                found: x.len(),
            });
        }
        let r = spec.generate(index as u64)?;
        let start = measurements.len();
        measurements.resize(start + m, 0.0);
        measure_into(&r, x, &mut measurements[start..])?;
    }
    if measurements.is_empty() {
        return Err(Error::EmptyDataset);
    }
    SketchSet::new(*spec, measurements)
}
