//! Binary sketch files.
//!
//! Layout: one JSON header line `{"version":1,"spec":{...},"n":N}` terminated
//! by `\n`, followed by `n · m` little-endian `f64` values in sample order.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use compcov_core::{ProjectionSpec, SketchSet};
use serde::{Deserialize, Serialize};

use super::{create, open};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAX_HEADER_BYTES: u64 = 1 << 16;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    spec: ProjectionSpec,
    n: u64,
}

pub fn write_sketches<W: Write>(mut w: W, sketches: &SketchSet) -> std::io::Result<()> {
    let header = Header {
        version: FORMAT_VERSION,
        spec: *sketches.spec(),
        n: sketches.n() as u64,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for v in sketches.as_flat() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

pub fn save(path: &Path, sketches: &SketchSet) -> Result<()> {
    write_sketches(create(path)?, sketches).map_err(|e| Error::io(path, e))
}

/// Parses a sketch file; `path` is only used in error messages.
pub fn read_sketches<R: BufRead>(mut r: R, path: &Path) -> Result<SketchSet> {
    let corrupt = |offset: u64, message: String| Error::Corrupt {
        path: path.to_path_buf(),
        offset,
        message,
    };

    let mut line = Vec::new();
    let read = (&mut r)
        .take(MAX_HEADER_BYTES)
        .read_until(b'\n', &mut line)
        .map_err(|e| Error::io(path, e))?;
    if read == 0 {
        return Err(corrupt(0, "empty file".into()));
    }
    if line.last() != Some(&b'\n') {
        return Err(corrupt(read as u64, "header line is not terminated".into()));
    }
    let header: Header = serde_json::from_slice(&line[..line.len() - 1]).map_err(|e| {
        corrupt(
            e.column().saturating_sub(1) as u64,
            format!("bad header: {e}"),
        )
    })?;
    if header.version != FORMAT_VERSION {
        return Err(corrupt(
            0,
            format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                header.version
            ),
        ));
    }
    let header_len = line.len() as u64;
    let m = header.spec.m() as u64;
    let expected = header
        .n
        .checked_mul(m)
        .filter(|&v| v > 0 && v < (1 << 60))
        .ok_or_else(|| corrupt(0, format!("implausible record count n = {}", header.n)))?;

    let mut payload = Vec::new();
    r.take(expected * 8 + 1)
        .read_to_end(&mut payload)
        .map_err(|e| Error::io(path, e))?;
    let want = expected * 8;
    let got = payload.len() as u64;
    if got < want {
        return Err(corrupt(
            header_len + got - got % 8,
            format!("truncated payload: {got} of {want} bytes"),
        ));
    }
    if got > want {
        return Err(corrupt(
            header_len + want,
            "trailing bytes after payload".into(),
        ));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(SketchSet::new(header.spec, values)?)
}

pub fn load(path: &Path) -> Result<SketchSet> {
    read_sketches(open(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use compcov_core::{sketch_dataset, Distribution};

    fn sample_set() -> SketchSet {
        let spec = ProjectionSpec::new(Distribution::SparseSign { s: 2.0 }, 6, 2, 9).unwrap();
        let data = vec![
            vec![1.0, -2.5, 0.0, 1e-300, 3.25, f64::MIN_POSITIVE],
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
        ];
        sketch_dataset(&spec, &data).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let set = sample_set();
        let mut buf = Vec::new();
        write_sketches(&mut buf, &set).unwrap();
        let back = read_sketches(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back.spec(), set.spec());
        let a: Vec<u64> = set.as_flat().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.as_flat().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn header_carries_spec_fields() {
        let mut buf = Vec::new();
        write_sketches(&mut buf, &sample_set()).unwrap();
        let end = buf.iter().position(|&b| b == b'\n').unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf[..end]).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["n"], 2);
        assert_eq!(v["spec"]["family"], "sparse_sign");
        assert_eq!(v["spec"]["s"], 2.0);
        assert_eq!(v["spec"]["p"], 6);
        assert_eq!(v["spec"]["m"], 2);
        assert_eq!(v["spec"]["master_seed"], 9);
    }

    #[test]
    fn truncation_reports_offset() {
        let mut buf = Vec::new();
        write_sketches(&mut buf, &sample_set()).unwrap();
        let header_len = buf.iter().position(|&b| b == b'\n').unwrap() as u64 + 1;
        buf.truncate(buf.len() - 11);
        let err = read_sketches(buf.as_slice(), Path::new("s.bin")).unwrap_err();
        match err {
            Error::Corrupt { offset, .. } => assert_eq!(offset, header_len + 16),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            read_sketches(buf.as_slice(), Path::new("s.bin"))
                .unwrap_err()
                .exit_code(),
            3
        );
    }

    #[test]
    fn trailing_bytes_and_bad_header_are_corrupt() {
        let mut buf = Vec::new();
        write_sketches(&mut buf, &sample_set()).unwrap();
        let full = buf.len() as u64;
        buf.push(0);
        match read_sketches(buf.as_slice(), Path::new("s.bin")).unwrap_err() {
            Error::Corrupt { offset, .. } => assert_eq!(offset, full),
            other => panic!("unexpected {other:?}"),
        }
        let bad = b"{\"version\":1,\"spec\":{}}\n";
        assert!(matches!(
            read_sketches(&bad[..], Path::new("s.bin")),
            Err(Error::Corrupt { .. })
        ));
        assert!(matches!(
            read_sketches(&b""[..], Path::new("s.bin")),
            Err(Error::Corrupt { offset: 0, .. })
        ));
    }

    #[test]
    fn wrong_version_rejected() {
        let mut buf = Vec::new();
        write_sketches(&mut buf, &sample_set()).unwrap();
        let text = String::from_utf8_lossy(&buf).replacen("\"version\":1", "\"version\":2", 1);
        let err = read_sketches(text.as_bytes(), Path::new("s.bin")).unwrap_err();
        assert!(err.to_string().contains("version"));
    }
}
