//! Shared fixtures for unit tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseVector;
use crate::sparse::SparseSymMatrix;

/// The 5x5 worked example used throughout: symmetric, indefinite, with an
/// empty pattern position in every row.
pub fn five_node_matrix() -> SparseSymMatrix {
    SparseSymMatrix::from_triplets(
        5,
        vec![
            (0, 0, 1.0),
            (0, 1, 0.5),
            (1, 1, 2.2),
            (1, 2, 4.1),
            (1, 4, 1.2),
            (2, 2, -1.5),
            (2, 3, 2.0),
            (3, 3, 3.6),
            (3, 4, -0.8),
            (4, 4, -0.1),
        ],
    )
    .unwrap()
}

pub fn five_node_rhs() -> DenseVector {
    DenseVector::from_vec(vec![2.7, -1.1, -2.6, 5.4, 4.8])
}

/// [[2,-1,0],[-1,2,-1],[0,-1,2]]: small SPD matrix with a known inverse.
pub fn tridiag3() -> SparseSymMatrix {
    SparseSymMatrix::from_triplets(
        3,
        vec![
            (0, 0, 2.0),
            (0, 1, -1.0),
            (1, 1, 2.0),
            (1, 2, -1.0),
            (2, 2, 2.0),
        ],
    )
    .unwrap()
}

/// Random strictly diagonally dominant SPD system with 4..=max_n unknowns.
pub fn random_system(seed: u64, max_n: usize) -> (SparseSymMatrix, DenseVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=max_n.max(4));
    let mut entries = Vec::new();
    let mut row_abs = vec![0.0f64; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < 0.35 {
                let v = 2.0 * rng.gen::<f64>() - 1.0;
                if v != 0.0 {
                    entries.push((i, j, v));
                    row_abs[i] += v.abs();
                    row_abs[j] += v.abs();
                }
            }
        }
    }
    for (i, &s) in row_abs.iter().enumerate() {
        entries.push((i, i, s + 0.5 + rng.gen::<f64>()));
    }
    let a = SparseSymMatrix::from_triplets(n, entries).unwrap();
    let b = DenseVector::from_vec((0..n).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect());
    (a, b)
}

pub fn random_vector(seed: u64, n: usize) -> DenseVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseVector::from_vec((0..n).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect())
}
