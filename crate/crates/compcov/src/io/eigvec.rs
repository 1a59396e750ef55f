//! Eigenvector exports: CSV columns and 8-bit binary PGM images.

use std::io::Write;
use std::path::Path;

use compcov_core::SpectrumSummary;

use super::create;
use crate::{Error, Result};

/// One row per coordinate, one column per eigenvector.
pub fn write_csv<W: Write>(w: W, summary: &SpectrumSummary) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let k = summary.eigenvectors.len();
    let mut header = vec!["index".to_owned()];
    header.extend((1..=k).map(|i| format!("v{i}")));
    wtr.write_record(&header).map_err(csv_err)?;
    let p = summary.eigenvectors.first().map_or(0, Vec::len);
    for i in 0..p {
        let mut row = vec![i.to_string()];
        row.extend(summary.eigenvectors.iter().map(|v| format!("{:e}", v[i])));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::Usage(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Usage(format!("csv write failed: {e}"))
}

/// Parses `WxH`.
pub fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Usage(format!("bad image dimensions {s:?}, expected WIDTHxHEIGHT"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

pub fn check_dims(width: usize, height: usize, p: usize) -> Result<()> {
    if width.checked_mul(height) != Some(p) {
        return Err(Error::Usage(format!(
            "image dimensions {width}x{height} = {} do not match p = {p}",
            width.saturating_mul(height)
        )));
    }
    Ok(())
}

/// Row-major image of `v`, linearly mapped from `[min, max]` to `[0, 255]`.
pub fn write_pgm<W: Write>(mut w: W, v: &[f64], width: usize, height: usize) -> Result<()> {
    check_dims(width, height, v.len())?;
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let range = hi - lo;
    let pixels: Vec<u8> = v
        .iter()
        .map(|&x| {
            if range > 0.0 {
                (255.0 * (x - lo) / range).round() as u8
            } else {
                128
            }
        })
        .collect();
    let io = |e| Error::Usage(format!("pgm write failed: {e}"));
    write!(w, "P5\n{width} {height}\n255\n").map_err(io)?;
    w.write_all(&pixels).map_err(io)?;
    w.flush().map_err(io)
}

pub fn save_csv(path: &Path, summary: &SpectrumSummary) -> Result<()> {
    write_csv(create(path)?, summary)
}

pub fn save_pgm(path: &Path, v: &[f64], width: usize, height: usize) -> Result<()> {
    write_pgm(create(path)?, v, width, height)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_parse_and_check() {
        assert_eq!(parse_dims("28x28").unwrap(), (28, 28));
        assert!(check_dims(28, 28, 784).is_ok());
        assert!(check_dims(28, 27, 784).is_err());
        assert!(parse_dims("28").is_err());
        assert!(parse_dims("0x5").is_err());
    }

    #[test]
    fn pgm_layout() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, &[0.0, 1.0, 0.5, -1.0, 1.0, 0.0], 3, 2).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..], &[128, 255, 191, 0, 255, 128]);
    }

    #[test]
    fn csv_has_one_column_per_vector() {
        let summary = SpectrumSummary {
            eigenvalues: vec![2.0, 1.0],
            eigenvectors: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            stable_rank: 1.25,
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &summary).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "index,v1,v2\n0,1e0,0e0\n1,0e0,1e0\n");
    }
}
