//! Matrix Market reader and writer (real/integer, general/symmetric,
//! array and coordinate).

use std::io::{BufRead, Write};
use std::path::Path;

use compcov_core::{Dataset, SymMatrix};

use super::{create, open};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Array,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
}

/// A dense row-major matrix as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub symmetry: Symmetry,
}

impl DenseMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

struct Lines<R> {
    inner: R,
    path: std::path::PathBuf,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> Lines<R> {
    /// Next line that is neither blank nor a comment.
    fn next_data(&mut self) -> Result<Option<String>> {
        loop {
            self.buf.clear();
            let n = self
                .inner
                .read_line(&mut self.buf)
                .map_err(|e| Error::io(&self.path, e))?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let t = self.buf.trim();
            if !t.is_empty() && !t.starts_with('%') {
                return Ok(Some(t.to_owned()));
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line_no,
            message: message.into(),
        }
    }
}

fn parse_header(line: &str) -> std::result::Result<(Layout, Symmetry), String> {
    let tokens: Vec<String> = line
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(format!("malformed header {line:?}"));
    }
    let layout = match tokens[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(format!("unknown format {other:?}")),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        "pattern" => return Err("pattern matrices carry no values and are not supported".into()),
        other => return Err(format!("unsupported field {other:?}")),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(format!("unsupported symmetry {other:?}")),
    };
    Ok((layout, symmetry))
}

fn parse_usize(tok: Option<&str>, what: &str) -> std::result::Result<usize, String> {
    let tok = tok.ok_or_else(|| format!("missing {what}"))?;
    tok.parse().map_err(|_| format!("bad {what} {tok:?}"))
}

fn parse_value(tok: Option<&str>) -> std::result::Result<f64, String> {
    let tok = tok.ok_or("missing value")?;
    tok.parse().map_err(|_| format!("bad value {tok:?}"))
}

/// Reads a Matrix Market file; `path` is only used in error messages.
pub fn read_matrix<R: BufRead>(reader: R, path: &Path) -> Result<DenseMatrix> {
    let mut lines = Lines {
        inner: reader,
        path: path.to_path_buf(),
        line_no: 0,
        buf: String::new(),
    };

    lines.buf.clear();
    lines
        .inner
        .read_line(&mut lines.buf)
        .map_err(|e| Error::io(path, e))?;
    lines.line_no = 1;
    let (layout, symmetry) = parse_header(lines.buf.trim()).map_err(|m| lines.err(m))?;

    let size_line = lines
        .next_data()?
        .ok_or_else(|| lines.err("missing size line"))?;
    let mut tok = size_line.split_whitespace();
    let rows = parse_usize(tok.next(), "row count").map_err(|m| lines.err(m))?;
    let cols = parse_usize(tok.next(), "column count").map_err(|m| lines.err(m))?;
    let nnz = match layout {
        Layout::Coordinate => {
            Some(parse_usize(tok.next(), "entry count").map_err(|m| lines.err(m))?)
        }
        Layout::Array => None,
    };
    if tok.next().is_some() {
        return Err(lines.err("extra tokens on size line"));
    }
    if rows == 0 || cols == 0 {
        return Err(lines.err("matrix has no entries"));
    }
    if symmetry == Symmetry::Symmetric && rows != cols {
        return Err(lines.err("symmetric matrix must be square"));
    }
    let len = rows
        .checked_mul(cols)
        .filter(|&l| l <= 1 << 32)
        .ok_or_else(|| lines.err("matrix too large"))?;
    let mut data = vec![0.0; len];

    match nnz {
        None => {
            // Column-major; symmetric files list only the lower triangle.
            for j in 0..cols {
                let start = if symmetry == Symmetry::Symmetric {
                    j
                } else {
                    0
                };
                for i in start..rows {
                    let line = lines.next_data()?.ok_or_else(|| {
                        lines.err(format!("expected value for entry ({}, {})", i + 1, j + 1))
                    })?;
                    let mut t = line.split_whitespace();
                    let v = parse_value(t.next()).map_err(|m| lines.err(m))?;
                    if t.next().is_some() {
                        return Err(lines.err("expected one value per line"));
                    }
                    data[i * cols + j] = v;
                    if symmetry == Symmetry::Symmetric {
                        data[j * cols + i] = v;
                    }
                }
            }
        }
        Some(nnz) => {
            for _ in 0..nnz {
                let line = lines
                    .next_data()?
                    .ok_or_else(|| lines.err(format!("expected {nnz} entries")))?;
                let mut t = line.split_whitespace();
                let i = parse_usize(t.next(), "row index").map_err(|m| lines.err(m))?;
                let j = parse_usize(t.next(), "column index").map_err(|m| lines.err(m))?;
                let v = parse_value(t.next()).map_err(|m| lines.err(m))?;
                if t.next().is_some() {
                    return Err(lines.err("too many tokens in entry"));
                }
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(lines.err(format!(
                        "index ({i}, {j}) out of bounds for {rows}x{cols} matrix"
                    )));
                }
                let (i, j) = (i - 1, j - 1);
                data[i * cols + j] += v;
                if symmetry == Symmetry::Symmetric && i != j {
                    data[j * cols + i] += v;
                }
            }
        }
    }
    if lines.next_data()?.is_some() {
        return Err(lines.err("unexpected data after last entry"));
    }
    Ok(DenseMatrix {
        rows,
        cols,
        data,
        symmetry,
    })
}

pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    read_matrix(open(path)?, path)
}

/// Loads a dataset; columns are samples unless `samples_rows` is set.
pub fn load_matrix_market(path: &Path, samples_rows: bool) -> Result<Dataset> {
    let mat = load_matrix(path)?;
    let source = path.display().to_string();
    let ds = if samples_rows {
        Dataset::new(mat.cols, mat.data, source)?
    } else {
        Dataset::from_columns(mat.rows, mat.cols, &mat.data, source)?
    };
    Ok(ds)
}

/// Loads a square symmetric matrix (e.g. a written estimate).
pub fn load_symmetric(path: &Path) -> Result<SymMatrix> {
    let mat = load_matrix(path)?;
    if mat.rows != mat.cols {
        return Err(Error::Usage(format!(
            "{}: expected a square matrix, found {}x{}",
            path.display(),
            mat.rows,
            mat.cols
        )));
    }
    Ok(SymMatrix::from_row_major(mat.rows, mat.data)?)
}

// `{:e}` prints the shortest representation that parses back to the same bits.
fn write_value<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    writeln!(w, "{v:e}")
}

/// Writes a symmetric array file (lower triangle, column-major).
pub fn write_symmetric<W: Write>(mut w: W, m: &SymMatrix, comment: &str) -> std::io::Result<()> {
    let p = m.dim();
    writeln!(w, "%%MatrixMarket matrix array real symmetric")?;
    for line in comment.lines() {
        writeln!(w, "% {line}")?;
    }
    writeln!(w, "{p} {p}")?;
    for j in 0..p {
        for i in j..p {
            write_value(&mut w, m.get(i, j))?;
        }
    }
    w.flush()
}

/// Writes a general array file for a row-major `rows × cols` matrix.
pub fn write_general<W: Write>(
    mut w: W,
    rows: usize,
    cols: usize,
    data: &[f64],
    comment: &str,
) -> std::io::Result<()> {
    assert_eq!(data.len(), rows * cols);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    for line in comment.lines() {
        writeln!(w, "% {line}")?;
    }
    writeln!(w, "{rows} {cols}")?;
    for j in 0..cols {
        for i in 0..rows {
            write_value(&mut w, data[i * cols + j])?;
        }
    }
    w.flush()
}

/// Writes a dataset as a `p × n` array, one column per sample.
pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let (p, n) = (ds.p(), ds.n());
    let mut data = vec![0.0; p * n];
    for (c, x) in ds.iter().enumerate() {
        for (r, &v) in x.iter().enumerate() {
            data[r * n + c] = v;
        }
    }
    write_general(create(path)?, p, n, &data, ds.source()).map_err(|e| Error::io(path, e))
}

pub fn save_symmetric(path: &Path, m: &SymMatrix, comment: &str) -> Result<()> {
    write_symmetric(create(path)?, m, comment).map_err(|e| Error::io(path, e))
}
