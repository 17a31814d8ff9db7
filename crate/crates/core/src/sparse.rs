//! Symmetric sparse matrices.
//!
//! Only the upper triangle is stored (as sorted COO triplets); a row-compressed
//! index over the full symmetric expansion is kept alongside it so that
//! matrix-vector products can walk each row in ascending column order. That
//! fixed traversal order is what makes every product reproducible bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::{DenseMatrix, DenseVector, Permutation};
use crate::error::{Error, Result};

/// Exact all-source BFS is used for the graph diameter up to this many nodes.
pub const DIAMETER_EXACT_CAP: usize = 4096;

/// Symmetric `n x n` sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    /// Upper-triangle entries `(i, j, v)` with `i <= j`, sorted by `(i, j)`,
    /// no duplicates, no explicit zeros.
    triplets: Vec<(usize, usize, f64)>,
    /// Row index over the symmetric expansion; columns ascend within a row.
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds a matrix from triplets covering either triangle. Entries are
    /// folded to the upper triangle; explicit zeros are dropped; a coefficient
    /// given twice (in any orientation) is an error.
    pub fn from_triplets(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut upper: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::EntryOutOfBounds { row: i, col: j, n });
            }
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { row: i, col: j });
            }
            if v == 0.0 {
                continue;
            }
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            upper.push((a, b, v));
        }
        upper.sort_unstable_by_key(|&(i, j, _)| (i, j));
        for w in upper.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::DuplicateEntry {
                    row: w[0].0,
                    col: w[0].1,
                });
            }
        }
        Ok(Self::from_canonical(n, upper))
    }

    /// `upper` must already be canonical: sorted, `i <= j`, unique, non-zero.
    fn from_canonical(n: usize, upper: Vec<(usize, usize, f64)>) -> Self {
        let mut expanded: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * upper.len());
        for &(i, j, v) in &upper {
            expanded.push((i, j, v));
            if i != j {
                expanded.push((j, i, v));
            }
        }
        expanded.sort_unstable_by_key(|&(i, j, _)| (i, j));

        let mut row_ptr = vec![0usize; n + 1];
        for &(i, _, _) in &expanded {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = expanded.iter().map(|&(_, j, _)| j).collect();
        let values = expanded.iter().map(|&(_, _, v)| v).collect();

        SparseSymMatrix {
            n,
            triplets: upper,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_canonical(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored upper-triangle entries.
    pub fn stored_nnz(&self) -> usize {
        self.triplets.len()
    }

    /// Number of entries in the symmetric expansion.
    pub fn sym_nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    /// Entries `(col, value)` of row `i` in the symmetric expansion,
    /// ascending by column.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> DenseVector {
        DenseVector::from_vec((0..self.n).map(|i| self.get(i, i)).collect())
    }

    /// Largest absolute entry, 0 for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.triplets
            .iter()
            .fold(0.0f64, |m, &(_, _, v)| m.max(v.abs()))
    }

    /// `A * v`. Each output component sums its row in ascending column order.
    pub fn spmv(&self, v: &DenseVector) -> Result<DenseVector> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "spmv",
                expected: self.n,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * v[self.col_idx[k]];
            }
            out[i] = acc;
        }
        Ok(DenseVector::from_vec(out))
    }

    /// `A * X` for a dense `n x d` matrix. Column `c` of the result is
    /// bit-identical to `spmv` of column `c`.
    pub fn spmm(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.n {
            return Err(Error::DimensionMismatch {
                context: "spmm",
                expected: self.n,
                found: x.rows(),
            });
        }
        let d = x.cols();
        let mut out = DenseMatrix::zeros(self.n, d);
        for i in 0..self.n {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let oi = out.row_mut(i);
            for c in 0..d {
                let mut acc = 0.0;
                for k in lo..hi {
                    acc += self.values[k] * x.get(self.col_idx[k], c);
                }
                oi[c] = acc;
            }
        }
        Ok(out)
    }

    /// Multiplies every entry by `c` (entries that underflow to zero are dropped).
    pub fn scaled(&self, c: f64) -> SparseSymMatrix {
        let scaled = self
            .triplets
            .iter()
            .map(|&(i, j, v)| (i, j, v * c))
            .filter(|&(_, _, v)| v != 0.0)
            .collect();
        Self::from_canonical(self.n, scaled)
    }

    /// Divides every entry by `d` (entries that underflow to zero are dropped).
    pub fn divided(&self, d: f64) -> SparseSymMatrix {
        let scaled = self
            .triplets
            .iter()
            .map(|&(i, j, v)| (i, j, v / d))
            .filter(|&(_, _, v)| v != 0.0)
            .collect();
        Self::from_canonical(self.n, scaled)
    }

    /// Relabels indices: entry `(p(i), p(j))` of the result equals entry
    /// `(i, j)` of the input.
    pub fn permuted(&self, p: &Permutation) -> Result<SparseSymMatrix> {
        if p.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "matrix permutation",
                expected: self.n,
                found: p.len(),
            });
        }
        let mut moved: Vec<(usize, usize, f64)> = self
            .triplets
            .iter()
            .map(|&(i, j, v)| {
                let (a, b) = (p.image(i), p.image(j));
                if a <= b {
                    (a, b, v)
                } else {
                    (b, a, v)
                }
            })
            .collect();
        moved.sort_unstable_by_key(|&(i, j, _)| (i, j));
        Ok(Self::from_canonical(self.n, moved))
    }

    /// Stacks matrices along the diagonal.
    pub fn block_diag(blocks: &[&SparseSymMatrix]) -> SparseSymMatrix {
        let n: usize = blocks.iter().map(|b| b.n).sum();
        let mut upper = Vec::with_capacity(blocks.iter().map(|b| b.stored_nnz()).sum());
        let mut offset = 0;
        for b in blocks {
            upper.extend(
                b.triplets
                    .iter()
                    .map(|&(i, j, v)| (i + offset, j + offset, v)),
            );
            offset += b.n;
        }
        Self::from_canonical(n, upper)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row_entries(i) {
                out.set(i, j, v);
            }
        }
        out
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_entries(i).map(|(j, _)| j).filter(move |&j| j != i)
    }

    fn bfs(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        let mut queue = std::collections::VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for v in self.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Hop diameter of the largest connected component, ignoring weights and
    /// self-loops. Exact (all-source BFS) up to [`DIAMETER_EXACT_CAP`] nodes,
    /// otherwise a double-sweep lower bound with `exact == false`.
    pub fn graph_diameter(&self) -> DiameterResult {
        self.graph_diameter_with_cap(DIAMETER_EXACT_CAP)
    }

    pub fn graph_diameter_with_cap(&self, cap: usize) -> DiameterResult {
        if self.n == 0 {
            return DiameterResult {
                hops: 0,
                exact: true,
            };
        }
        let mut component = vec![usize::MAX; self.n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for start in 0..self.n {
            if component[start] != usize::MAX {
                continue;
            }
            let id = members.len();
            let mut nodes = vec![start];
            component[start] = id;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for v in self.neighbors(u) {
                    if component[v] == usize::MAX {
                        component[v] = id;
                        nodes.push(v);
                        queue.push_back(v);
                    }
                }
            }
            members.push(nodes);
        }
        let largest = members
            .iter()
            .max_by_key(|nodes| nodes.len())
            .expect("n > 0");

        if largest.len() <= cap {
            let mut diameter = 0;
            for &src in largest {
                let dist = self.bfs(src);
                for &v in largest {
                    diameter = diameter.max(dist[v]);
                }
            }
            debug_assert!(self.double_sweep(largest[0]) <= diameter);
            DiameterResult {
                hops: diameter,
                exact: true,
            }
        } else {
            let mut best = 0;
            for k in 0..4 {
                let src = largest[k * largest.len() / 4];
                best = best.max(self.double_sweep(src));
            }
            DiameterResult {
                hops: best,
                exact: false,
            }
        }
    }

    /// BFS to the farthest node from `src`, then BFS again from there;
    /// returns the second eccentricity (a diameter lower bound).
    fn double_sweep(&self, src: usize) -> usize {
        let dist = self.bfs(src);
        let far = (0..self.n)
            .filter(|&v| dist[v] != usize::MAX)
            .max_by_key(|&v| dist[v])
            .unwrap_or(src);
        let dist2 = self.bfs(far);
        (0..self.n)
            .filter(|&v| dist2[v] != usize::MAX)
            .map(|v| dist2[v])
            .max()
            .unwrap_or(0)
    }

    /// Estimates the 2-norm condition number: power iteration for the largest
    /// eigenvalue magnitude, inverse iteration (CG inner solves) for the
    /// smallest. Intended for symmetric positive definite inputs; if an inner
    /// solve fails the estimate is returned with `converged == false`.
    pub fn condition_estimate(&self, tol: f64, max_iter: usize) -> CondEstimate {
        if self.n == 0 {
            return CondEstimate {
                kappa: 1.0,
                lambda_max: 0.0,
                lambda_min: 0.0,
                converged: true,
            };
        }
        let start = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..self.n).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
            let v = DenseVector::from_vec(v);
            let norm = v.norm2();
            v.scaled(1.0 / norm)
        };

        let mut v = start(0x51de);
        let mut lambda_max = 0.0;
        let mut max_ok = false;
        for _ in 0..max_iter {
            let w = self.spmv(&v).expect("dimension fixed");
            let lam = v.dot(&w);
            let norm = w.norm2();
            if norm == 0.0 {
                lambda_max = 0.0;
                break;
            }
            if (lam - lambda_max).abs() <= tol * lam.abs().max(f64::MIN_POSITIVE) {
                lambda_max = lam;
                max_ok = true;
                break;
            }
            lambda_max = lam;
            v = w.scaled(1.0 / norm);
        }

        if lambda_max == 0.0 {
            return CondEstimate {
                kappa: f64::INFINITY,
                lambda_max: 0.0,
                lambda_min: 0.0,
                converged: false,
            };
        }

        let mut u = start(0x51df);
        let mut lambda_min = 0.0;
        let mut min_ok = false;
        let inner_iters = (10 * self.n).max(100);
        for _ in 0..max_iter {
            let solve = match crate::solvers::conjugate_gradient(self, &u, None, 1e-12, inner_iters)
            {
                Ok(r) => r,
                Err(_) => break,
            };
            if !solve.converged || solve.solution.norm2() == 0.0 {
                break;
            }
            let z = solve.solution;
            let u_next = z.scaled(1.0 / z.norm2());
            let au = self.spmv(&u_next).expect("dimension fixed");
            let lam = u_next.dot(&au);
            if (lam - lambda_min).abs() <= tol * lam.abs().max(f64::MIN_POSITIVE) {
                lambda_min = lam;
                min_ok = true;
                break;
            }
            lambda_min = lam;
            u = u_next;
        }

        let kappa = if lambda_min != 0.0 {
            (lambda_max / lambda_min).abs()
        } else {
            f64::INFINITY
        };
        CondEstimate {
            kappa,
            lambda_max: lambda_max.abs(),
            lambda_min: lambda_min.abs(),
            converged: max_ok && min_ok,
        }
    }

    #[cfg(test)]
    pub(crate) fn validate_invariants(&self) {
        for w in self.triplets.windows(2) {
            assert!((w[0].0, w[0].1) < (w[1].0, w[1].1), "triplets sorted");
        }
        for &(i, j, v) in &self.triplets {
            assert!(i <= j, "stored entry in upper triangle");
            assert!(v != 0.0, "no explicit zeros");
            assert!(v.is_finite());
        }
        for i in 0..self.n {
            let cols: Vec<usize> = self.row_entries(i).map(|(j, _)| j).collect();
            for w in cols.windows(2) {
                assert!(w[0] < w[1], "row columns strictly ascending");
            }
        }
    }
}

/// Hop diameter plus whether it was computed exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiameterResult {
    pub hops: usize,
    pub exact: bool,
}

/// Spectral condition number estimate.
#[derive(Debug, Clone, Copy)]
pub struct CondEstimate {
    pub kappa: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub converged: bool,
}
