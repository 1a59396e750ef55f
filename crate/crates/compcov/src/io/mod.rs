//! File formats: sketch files, Matrix Market, CSV, estimate sidecars and
//! eigenvector exports.

pub mod csv_data;
pub mod eigvec;
pub mod estimate_file;
pub mod matrix_market;
pub mod sketch_file;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::{Error, Result};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}
