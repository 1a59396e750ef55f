//! Covariance estimates on disk: a symmetric Matrix Market array plus a JSON
//! sidecar `<path>.json` with provenance.

use std::path::{Path, PathBuf};

use compcov_core::{CovEstimate, EstimateKind, EstimateParams, ProjectionSpec};
use serde::{Deserialize, Serialize};

use super::{create, matrix_market, open};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: u32,
    pub kind: EstimateKind,
    pub p: usize,
    pub m: usize,
    pub n: u64,
    pub s: Option<f64>,
    pub kappa: f64,
    pub gamma: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub spec: ProjectionSpec,
    pub wall_time_seconds: f64,
}

impl Sidecar {
    pub fn from_estimate(est: &CovEstimate) -> Self {
        let EstimateParams {
            spec,
            m,
            p,
            s,
            kappa,
            n,
            gamma,
            alpha1,
            alpha2,
        } = est.params;
        Self {
            version: 1,
            kind: est.kind,
            p,
            m,
            n,
            s,
            kappa,
            gamma,
            alpha1,
            alpha2,
            spec,
            wall_time_seconds: est.wall_time_seconds,
        }
    }
}

pub fn sidecar_path(matrix_path: &Path) -> PathBuf {
    let mut s = matrix_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save(path: &Path, est: &CovEstimate) -> Result<()> {
    let comment = format!("compcov {:?} covariance estimate", est.kind);
    matrix_market::save_symmetric(path, &est.matrix, &comment)?;
    let side = sidecar_path(path);
    let mut w = create(&side)?;
    serde_json::to_writer_pretty(&mut w, &Sidecar::from_estimate(est))?;
    std::io::Write::flush(&mut w).map_err(|e| Error::io(&side, e))
}

pub fn load_sidecar(matrix_path: &Path) -> Result<Sidecar> {
    let side = sidecar_path(matrix_path);
    Ok(serde_json::from_reader(open(&side)?)?)
}
