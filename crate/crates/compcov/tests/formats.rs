use std::path::Path;

use compcov::ingest::{load_dataset, Orientation};
use compcov::io::{csv_data, estimate_file, matrix_market, sketch_file};
use compcov_core::{estimate, sketch_dataset, Dataset, Distribution, EstimateKind, ProjectionSpec};
use proptest::prelude::*;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn matrix_market_orientation_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "d.mtx",
        "%%MatrixMarket matrix array real general\n2 3\n1\n4\n2\n5\n3\n6\n",
    );
    let cols = load_dataset(&path, Orientation::Native).unwrap();
    assert_eq!((cols.p(), cols.n()), (2, 3));
    assert_eq!(cols.sample(2), &[3.0, 6.0]);
    let rows = load_dataset(&path, Orientation::Transposed).unwrap();
    assert_eq!((rows.p(), rows.n()), (3, 2));
    assert_eq!(rows.sample(1), &[4.0, 5.0, 6.0]);
}

#[test]
fn csv_orientation_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "d.csv", "1,2,3\n4,5,6\n");
    let rows = load_dataset(&path, Orientation::Native).unwrap();
    assert_eq!((rows.p(), rows.n()), (3, 2));
    let cols = load_dataset(&path, Orientation::Transposed).unwrap();
    assert_eq!((cols.p(), cols.n()), (2, 3));
    assert_eq!(cols.sample(0), &[1.0, 4.0]);
}

#[test]
fn unknown_extension_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "d.json", "[]");
    assert_eq!(
        load_dataset(&path, Orientation::Native)
            .unwrap_err()
            .exit_code(),
        2
    );
}

#[test]
fn estimate_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ProjectionSpec::new(Distribution::SparseSign { s: 2.0 }, 5, 2, 3).unwrap();
    let data: Vec<Vec<f64>> = (0..7)
        .map(|i| {
            (0..5)
                .map(|k| ((i * 5 + k) % 9) as f64 * 0.37 - 1.0)
                .collect()
        })
        .collect();
    let set = sketch_dataset(&spec, &data).unwrap();
    let est = estimate(&set, EstimateKind::Unbiased).unwrap();
    let path = dir.path().join("c.mtx");
    estimate_file::save(&path, &est).unwrap();
    assert_eq!(matrix_market::load_symmetric(&path).unwrap(), est.matrix);
    let side = estimate_file::load_sidecar(&path).unwrap();
    assert_eq!(side.spec, spec);
    assert_eq!(side.n, 7);
    assert_eq!(side.alpha1, est.params.alpha1);
    assert_eq!(side.alpha2, est.params.alpha2);
    assert_eq!(side.gamma, Some(1.0));
    assert_eq!(side.kappa, -1.0);

    let sk = dir.path().join("s.bin");
    sketch_file::save(&sk, &set).unwrap();
    assert_eq!(sketch_file::load(&sk).unwrap(), set);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matrix_market_round_trip_is_exact(
        p in 1usize..8,
        values in prop::collection::vec(finite(), 1..64),
    ) {
        let n = (values.len() / p).max(1);
        let mut values = values;
        values.resize(p * n, 0.5);
        let ds = Dataset::new(p, values, "prop").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.mtx");
        matrix_market::save_dataset(&path, &ds).unwrap();
        let back = matrix_market::load_matrix_market(&path, false).unwrap();
        prop_assert_eq!(back.as_flat(), ds.as_flat());
    }

    #[test]
    fn csv_round_trip_is_exact(
        p in 1usize..8,
        values in prop::collection::vec(finite(), 1..64),
    ) {
        let n = (values.len() / p).max(1);
        let mut values = values;
        values.resize(p * n, -0.25);
        let ds = Dataset::new(p, values, "prop").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        csv_data::save_csv(&path, &ds).unwrap();
        let back = csv_data::load_csv(&path, false).unwrap();
        prop_assert_eq!(back.as_flat(), ds.as_flat());
    }

    #[test]
    fn sketch_file_round_trip_is_bit_exact(
        seed in any::<u64>(),
        bits in prop::collection::vec(any::<u64>(), 1..40),
    ) {
        let m = 2;
        let mut values: Vec<f64> = bits.iter().map(|b| f64::from_bits(*b)).collect();
        if values.len() % m == 1 {
            values.push(f64::NAN);
        }
        let spec = ProjectionSpec::new(Distribution::Gaussian, 9, m, seed).unwrap();
        let set = compcov_core::SketchSet::new(spec, values.clone()).unwrap();
        let mut buf = Vec::new();
        sketch_file::write_sketches(&mut buf, &set).unwrap();
        let back = sketch_file::read_sketches(buf.as_slice(), Path::new("mem")).unwrap();
        let got: Vec<u64> = back.as_flat().iter().map(|v| v.to_bits()).collect();
        let want: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn truncated_sketch_files_never_load(cut in 1usize..200) {
        let spec = ProjectionSpec::new(Distribution::SparseSign { s: 3.0 }, 6, 2, 1).unwrap();
        let set = compcov_core::SketchSet::new(spec, (0..20).map(f64::from).collect()).unwrap();
        let mut buf = Vec::new();
        sketch_file::write_sketches(&mut buf, &set).unwrap();
        let keep = buf.len().saturating_sub(cut);
        let err = sketch_file::read_sketches(&buf[..keep], Path::new("s.bin")).unwrap_err();
        prop_assert_eq!(err.exit_code(), 3);
    }
}
