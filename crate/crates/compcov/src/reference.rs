//! The exact sample covariance used as the reference in sweeps, cached on
//! disk next to the dataset and keyed by a content hash.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use compcov_core::{Dataset, SymMatrix};
use sha2::{Digest, Sha256};

use crate::io::{create, open};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"CCOVREF1";

/// Hex SHA-256 over the dataset shape and the bits of every value.
pub fn content_hash(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update(b"compcov-dataset\0");
    h.update((ds.p() as u64).to_le_bytes());
    h.update((ds.n() as u64).to_le_bytes());
    for v in ds.as_flat() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// `<dataset>.cn-<hash prefix>.bin`
pub fn cache_path(dataset_path: &Path, hash: &str) -> PathBuf {
    let mut s = dataset_path.as_os_str().to_owned();
    s.push(format!(".cn-{}.bin", &hash[..16]));
    PathBuf::from(s)
}

fn read_cache(path: &Path, p: usize) -> Result<SymMatrix> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let bad = |message: &str| Error::Corrupt {
        path: path.to_path_buf(),
        offset: 0,
        message: message.into(),
    };
    if bytes.len() != 16 + 8 * p * p || &bytes[..8] != MAGIC {
        return Err(bad("unexpected cache layout"));
    }
    let dim = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    if dim != p as u64 {
        return Err(bad("dimension mismatch"));
    }
    let data = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(SymMatrix::from_row_major(p, data)?)
}

fn write_cache(path: &Path, c: &SymMatrix) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&(c.dim() as u64).to_le_bytes()).map_err(io)?;
    for v in c.as_slice() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Returns `C_n`, reading it from the cache next to `dataset_path` when a
/// valid entry exists and writing one otherwise. Cache failures only warn.
pub fn reference_covariance(ds: &Dataset, dataset_path: Option<&Path>) -> SymMatrix {
    let Some(dataset_path) = dataset_path else {
        return ds.sample_covariance();
    };
    let path = cache_path(dataset_path, &content_hash(ds));
    if path.exists() {
        match read_cache(&path, ds.p()) {
            Ok(c) => {
                log::info!("loaded reference covariance from {}", path.display());
                return c;
            }
            Err(e) => log::warn!("ignoring reference cache: {e}"),
        }
    }
    let c = ds.sample_covariance();
    if let Err(e) = write_cache(&path, &c) {
        log::warn!("could not write reference cache: {e}");
    }
    c
}
