use compcov_core::estimator::{accumulate_sketches, debias_matrix, UpdatePath};
use compcov_core::linalg::SymMatrix;
use compcov_core::metrics::{spectral_norm, stable_rank, top_eigenvectors};
use compcov_core::oracle::expected_biased;
use compcov_core::sketch::{backproject, measure, sketch_dataset};
use compcov_core::{CovAccumulator, Distribution, ProjectedSample, ProjectionSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense_rrt_x(r: &[f64], p: usize, m: usize, x: &[f64]) -> Vec<f64> {
    let y: Vec<f64> = (0..m)
        .map(|j| (0..p).map(|i| r[j * p + i] * x[i]).sum())
        .collect();
    (0..p)
        .map(|i| (0..m).map(|j| r[j * p + i] * y[j]).sum())
        .collect()
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = b.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

fn dist_strategy() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        Just(Distribution::Gaussian),
        (1.0f64..12.0).prop_map(|s| Distribution::SparseSign { s }),
    ]
}

fn sym_strategy(max_p: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_p).prop_flat_map(|p| {
        prop::collection::vec(-10.0f64..10.0, p * p)
            .prop_map(move |v| SymMatrix::from_upper_fn(p, |i, j| v[i * p + j]))
    })
}

fn nalgebra_eigen(a: &SymMatrix) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
    let p = a.dim();
    let m = nalgebra::DMatrix::from_row_slice(p, p, a.as_slice());
    let eig = m.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sparse_backprojection_matches_dense(
        dist in dist_strategy(),
        p in 2usize..=64,
        mfrac in 0.0f64..1.0,
        seed in any::<u64>(),
        index in 0u64..1000,
        x in prop::collection::vec(-5.0f64..5.0, 64),
    ) {
        let m = 1 + ((p - 1) as f64 * mfrac) as usize % (p - 1);
        let spec = ProjectionSpec::new(dist, p, m, seed).unwrap();
        let r = spec.generate(index).unwrap();
        let x = &x[..p];
        let z = backproject(&r, &measure(&r, x).unwrap()).unwrap().to_dense();
        let oracle = dense_rrt_x(&r.to_dense(), p, m, x);
        prop_assert!(rel_close(&z, &oracle, 1e-12));
    }

    #[test]
    fn update_paths_agree(z in prop::collection::vec(prop_oneof![Just(0.0), -3.0f64..3.0], 1..40)) {
        let p = z.len() + 1;
        let mut z = z;
        z.push(0.0);
        let spec = ProjectionSpec::new(Distribution::Gaussian, p, 1, 0).unwrap();
        let sample = ProjectedSample::from_dense(&z);
        let mut sparse = CovAccumulator::new(spec);
        let mut dense = CovAccumulator::new(spec);
        for _ in 0..3 {
            sparse.accumulate_with(&sample, UpdatePath::Sparse).unwrap();
            dense.accumulate_with(&sample, UpdatePath::Dense).unwrap();
        }
        prop_assert!(rel_close(sparse.sum().as_slice(), dense.sum().as_slice(), 1e-12));
        let mut outer = SymMatrix::outer(&z);
        outer.scale(3.0);
        prop_assert!(rel_close(sparse.sum().as_slice(), outer.as_slice(), 1e-12));
    }

    #[test]
    fn spectral_norm_invariants(a in sym_strategy(40), c in -4.0f64..4.0) {
        let norm = spectral_norm(&a).unwrap();
        let neg = spectral_norm(&a.scaled(-1.0)).unwrap();
        prop_assert!((norm - neg).abs() <= 1e-10 * norm.max(1.0));
        let scaled = spectral_norm(&a.scaled(c)).unwrap();
        prop_assert!((scaled - c.abs() * norm).abs() <= 1e-9 * norm.max(1.0));
        let fro = a.frobenius_norm();
        prop_assert!(norm <= fro * (1.0 + 1e-12));
        prop_assert!(fro <= (a.dim() as f64).sqrt() * norm * (1.0 + 1e-12));
    }

    #[test]
    fn sketching_binds_index_not_arrival(
        seed in any::<u64>(),
        data in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 10), 2..6),
    ) {
        let spec = ProjectionSpec::new(Distribution::SparseSign { s: 2.0 }, 10, 4, seed).unwrap();
        let set = sketch_dataset(&spec, &data).unwrap();
        let mut reversed = data.clone();
        reversed.reverse();
        let rev = sketch_dataset(&spec, &reversed).unwrap();
        // sample i arriving at position n-1-i gets R_{n-1-i}
        let n = data.len();
        for (i, x) in data.iter().enumerate() {
            let r = spec.generate((n - 1 - i) as u64).unwrap();
            let y = measure(&r, x).unwrap();
            prop_assert_eq!(rev.measurement(n - 1 - i), y.as_slice());
            let r = spec.generate(i as u64).unwrap();
            let y = measure(&r, x).unwrap();
            prop_assert_eq!(set.measurement(i), y.as_slice());
        }
    }
}

#[test]
fn merge_order_and_partition_do_not_matter() {
    let spec = ProjectionSpec::new(Distribution::SparseSign { s: 3.0 }, 24, 6, 8).unwrap();
    let data: Vec<Vec<f64>> = (0..30)
        .map(|i| {
            (0..24)
                .map(|k| ((i * 13 + k * 7) % 17) as f64 / 4.0 - 2.0)
                .collect()
        })
        .collect();
    let set = sketch_dataset(&spec, &data).unwrap();
    let whole = accumulate_sketches(&set)
        .unwrap()
        .finalize_biased()
        .unwrap();

    let samples: Vec<ProjectedSample> = set
        .iter()
        .enumerate()
        .map(|(i, y)| backproject(&spec.generate(i as u64).unwrap(), y).unwrap())
        .collect();
    for cuts in [vec![0, 30], vec![0, 7, 30], vec![0, 3, 11, 19, 30]] {
        let mut parts: Vec<CovAccumulator> = cuts
            .windows(2)
            .map(|w| {
                let mut acc = CovAccumulator::new(spec);
                for z in &samples[w[0]..w[1]] {
                    acc.accumulate(z).unwrap();
                }
                acc
            })
            .collect();
        parts.reverse();
        let mut merged = parts.pop().unwrap();
        for part in &parts {
            merged.merge(part).unwrap();
        }
        let est = merged.finalize_biased().unwrap();
        let diff = est.matrix.sub(&whole.matrix).unwrap().frobenius_norm();
        assert!(diff <= 1e-10 * whole.matrix.frobenius_norm());
        assert_eq!(est.params.n, 30);
    }
}

#[test]
fn debias_inverts_forward_map_on_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..100 {
        let p = [4usize, 16, 32][trial % 3];
        let m_mat = SymMatrix::from_upper_fn(p, |_, _| rng.random_range(-1.0..1.0));
        let norm = spectral_norm(&m_mat).unwrap();
        for kappa in [-2.0, -1.0, 0.0, 1.0, 97.0] {
            for m in [1usize, 2, 8, 32] {
                if kappa == -2.0 && m == 1 {
                    continue;
                }
                let back = debias_matrix(&expected_biased(&m_mat, kappa, m), kappa, m).unwrap();
                let err = back.sub(&m_mat).unwrap().max_abs();
                assert!(err <= 1e-12 * norm, "p={p} kappa={kappa} m={m}: {err}");
            }
        }
    }
}

#[test]
fn metrics_match_nalgebra_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..100 {
        let p = 1 + trial % 64;
        let a = SymMatrix::from_upper_fn(p, |_, _| rng.random_range(-1.0..1.0));
        let (values, vectors) = nalgebra_eigen(&a);
        let oracle_norm = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let norm = spectral_norm(&a).unwrap();
        assert!((norm - oracle_norm).abs() <= 1e-8 * oracle_norm);

        let fro2: f64 = values.iter().map(|v| v * v).sum();
        let sr = stable_rank(&a).unwrap();
        assert!((sr - fro2 / (oracle_norm * oracle_norm)).abs() <= 1e-8 * sr);

        let k = p.min(3);
        let summary = top_eigenvectors(&a, k).unwrap();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&x, &y| values[y].abs().total_cmp(&values[x].abs()));
        for (slot, &idx) in order.iter().take(k).enumerate() {
            assert!((summary.eigenvalues[slot] - values[idx]).abs() <= 1e-8 * oracle_norm);
            let gap = order
                .iter()
                .filter(|&&o| o != idx)
                .map(|&o| (values[o] - values[idx]).abs())
                .fold(f64::INFINITY, f64::min);
            if gap > 1e-3 {
                let v = &summary.eigenvectors[slot];
                let dot: f64 = (0..p).map(|i| v[i] * vectors[(i, idx)]).sum();
                assert!((dot.abs() - 1.0).abs() <= 1e-8, "trial {trial} slot {slot}");
            }
        }
    }
}

#[test]
fn projected_sample_support_bounds() {
    // For p/s >= 8 the mean support of z lies in [0.5, 1] x m p / s.
    let (p, m, s) = (256usize, 8usize, 16.0);
    let spec = ProjectionSpec::new(Distribution::SparseSign { s }, p, m, 3).unwrap();
    let x: Vec<f64> = (0..p).map(|i| 1.0 + (i % 5) as f64).collect();
    let trials = 1000;
    let mut total = 0usize;
    for i in 0..trials {
        let r = spec.generate(i).unwrap();
        total += backproject(&r, &measure(&r, &x).unwrap()).unwrap().nnz();
    }
    let mean = total as f64 / trials as f64;
    let bound = (m * p) as f64 / s;
    assert!(
        mean <= bound && mean >= 0.5 * bound,
        "mean nnz {mean}, bound {bound}"
    );
}
