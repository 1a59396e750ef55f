//! Numeric CSV datasets.

use std::io::Read;
use std::path::Path;

use compcov_core::Dataset;

use super::{create, open};
use crate::{Error, Result};

/// Reads a rectangular numeric CSV without a header row. Rows are samples
/// unless `transpose` is set, in which case columns are samples.
pub fn read_csv<R: Read>(reader: R, path: &Path, transpose: bool) -> Result<Dataset> {
    let cell_err = |row: usize, column: usize, message: String| Error::Cell {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(r + 1, |p| p.record() as usize + 1);
            cell_err(row, 0, e.to_string())
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(cell_err(
                    r + 1,
                    record.len().min(w) + 1,
                    format!("ragged row: {} fields, expected {w}", record.len()),
                ))
            }
            _ => {}
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| cell_err(r + 1, c + 1, format!("not a number: {field:?}")))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = width.ok_or_else(|| Error::Usage(format!("{}: empty CSV file", path.display())))?;
    let source = path.display().to_string();
    let ds = if transpose {
        Dataset::from_columns(rows, cols, &data, source)?
    } else {
        Dataset::new(cols, data, source)?
    };
    Ok(ds)
}

pub fn load_csv(path: &Path, transpose: bool) -> Result<Dataset> {
    read_csv(open(path)?, path, transpose)
}

/// One row per sample.
pub fn write_csv<W: std::io::Write>(w: W, ds: &Dataset) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for x in ds.iter() {
        wtr.write_record(x.iter().map(f64::to_string))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(path: &Path, ds: &Dataset) -> Result<()> {
    write_csv(create(path)?, ds).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}
