//! Dataset loading by file extension and synthetic spec files.

use std::path::Path;

use compcov_core::{Dataset, SynthSpec};

use crate::io::{csv_data, matrix_market, open};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// Matrix Market: columns are samples. CSV: rows are samples.
    #[default]
    Native,
    /// The opposite of the format's default.
    Transposed,
}

/// Loads `.mtx` (columns are samples) or `.csv` (rows are samples).
pub fn load_dataset(path: &Path, orientation: Orientation) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        ));
    }
    let transposed = orientation == Orientation::Transposed;
    match extension(path).as_str() {
        "mtx" | "mm" => matrix_market::load_matrix_market(path, transposed),
        "csv" | "txt" => csv_data::load_csv(path, transposed),
        other => Err(Error::Usage(format!(
            "{}: unrecognized dataset extension {other:?} (expected .mtx or .csv)",
            path.display()
        ))),
    }
}

pub fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

pub fn load_synth_spec(path: &Path) -> Result<SynthSpec> {
    let spec: SynthSpec = serde_json::from_reader(open(path)?)?;
    spec.validate()?;
    Ok(spec)
}
