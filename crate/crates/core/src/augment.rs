//! Input feature construction.
//!
//! Every node starts with its right-hand-side value; optional extra channels
//! append the matrix diagonal and iterates of cheap classic schemes (Jacobi,
//! CG, matrix powers). Every column is normalized component-wise by its max
//! magnitude, so features stay in [-1, 1] even when an iteration diverges.
//! Callers feed the canonical scaled system, keeping features scale-free.

use std::fmt;

use crate::dense::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::solvers;
use crate::sparse::SparseSymMatrix;

/// Columns with max magnitude at or below this are left unnormalized.
pub const NORMALIZE_TOL: f64 = 1e-30;

/// Which channels to build beyond the right-hand side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentationConfig {
    pub include_diagonal: bool,
    pub jacobi_steps: usize,
    pub cg_steps: usize,
    pub arnoldi_steps: usize,
}

impl AugmentationConfig {
    /// Input width: the rhs column plus everything configured.
    pub fn d_in(&self) -> usize {
        1 + usize::from(self.include_diagonal)
            + self.jacobi_steps
            + self.cg_steps
            + self.arnoldi_steps
    }

    /// Named presets, all with the diagonal channel and 14 iterate columns
    /// (split 7+7 for the combined ones) so the input width stays comparable:
    /// `none`, `jacobi`, `cg`, `arnoldi`, `cg+jacobi`, `cg+arnoldi`.
    pub fn preset(name: &str) -> Result<Self> {
        let (jacobi_steps, cg_steps, arnoldi_steps) = match name {
            "none" => (0, 0, 0),
            "jacobi" => (14, 0, 0),
            "cg" => (0, 14, 0),
            "arnoldi" => (0, 0, 14),
            "cg+jacobi" => (7, 7, 0),
            "cg+arnoldi" => (0, 7, 7),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown augmentation preset '{name}' (expected one of {})",
                    Self::PRESETS.join(", ")
                )))
            }
        };
        Ok(AugmentationConfig {
            include_diagonal: true,
            jacobi_steps,
            cg_steps,
            arnoldi_steps,
        })
    }

    pub const PRESETS: [&'static str; 6] =
        ["none", "jacobi", "cg", "arnoldi", "cg+jacobi", "cg+arnoldi"];

    /// Compact description like `diag+cg14`.
    pub fn describe(&self) -> String {
        let mut parts = vec!["b".to_string()];
        if self.include_diagonal {
            parts.push("diag".to_string());
        }
        if self.jacobi_steps > 0 {
            parts.push(format!("jacobi{}", self.jacobi_steps));
        }
        if self.cg_steps > 0 {
            parts.push(format!("cg{}", self.cg_steps));
        }
        if self.arnoldi_steps > 0 {
            parts.push(format!("arnoldi{}", self.arnoldi_steps));
        }
        parts.join("+")
    }
}

impl Default for AugmentationConfig {
    /// Diagonal plus 14 CG iterates: input width 16.
    fn default() -> Self {
        Self::preset("cg").expect("built-in preset")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureLabel {
    Rhs,
    Diagonal,
    Jacobi(usize),
    Cg(usize),
    Arnoldi(usize),
}

impl fmt::Display for FeatureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureLabel::Rhs => write!(f, "b"),
            FeatureLabel::Diagonal => write!(f, "diag"),
            FeatureLabel::Jacobi(k) => write!(f, "jacobi_{k}"),
            FeatureLabel::Cg(k) => write!(f, "cg_{k}"),
            FeatureLabel::Arnoldi(k) => write!(f, "arnoldi_{k}"),
        }
    }
}

/// Node features, one labeled column per channel.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub data: DenseMatrix,
    pub labels: Vec<FeatureLabel>,
}

impl FeatureMatrix {
    pub fn node_count(&self) -> usize {
        self.data.rows()
    }

    pub fn width(&self) -> usize {
        self.labels.len()
    }
}

/// Divides by the max magnitude when it exceeds `tol`, else returns the
/// vector unchanged.
pub fn normalize_column(v: &DenseVector, tol: f64) -> DenseVector {
    let m = v.max_abs();
    if m > tol {
        v.divided(m)
    } else {
        v.clone()
    }
}

/// Raw Jacobi iterates `x(1)..x(m)` from a zero start. If an iterate
/// overflows, the last finite one is repeated for the remaining columns.
pub fn jacobi_iterates(a: &SparseSymMatrix, b: &DenseVector, m: usize) -> Result<Vec<DenseVector>> {
    let n = a.n();
    let diag = a.diagonal();
    for (i, &d) in diag.iter().enumerate() {
        if d == 0.0 {
            return Err(Error::ZeroDiagonal { row: i });
        }
    }
    let mut iterates = Vec::with_capacity(m);
    let mut x = DenseVector::zeros(n);
    while iterates.len() < m {
        let ax = a.spmv(&x)?;
        let mut next = DenseVector::zeros(n);
        for i in 0..n {
            next[i] = x[i] + (b[i] - ax[i]) / diag[i];
        }
        if !next.is_all_finite() {
            let last = iterates
                .last()
                .cloned()
                .unwrap_or_else(|| DenseVector::zeros(n));
            while iterates.len() < m {
                iterates.push(last.clone());
            }
            break;
        }
        iterates.push(next.clone());
        x = next;
    }
    Ok(iterates)
}

/// Raw CG iterates `x(1)..x(m)` from a zero start. Once CG converges or its
/// curvature term breaks down, the last iterate is repeated.
pub fn cg_iterates(a: &SparseSymMatrix, b: &DenseVector, m: usize) -> Result<Vec<DenseVector>> {
    let mut out: Vec<DenseVector> = Vec::with_capacity(m);
    solvers::cg_core(a, b, None, 0.0, m, &mut |_, x| {
        out.push(x.clone());
        true
    })?;
    let last = out
        .last()
        .cloned()
        .unwrap_or_else(|| DenseVector::zeros(a.n()));
    while out.len() < m {
        out.push(last.clone());
    }
    Ok(out)
}

/// Matrix powers of `b`, each computed from the previous normalized vector
/// and re-normalized.
pub fn arnoldi_powers(a: &SparseSymMatrix, b: &DenseVector, m: usize) -> Result<Vec<DenseVector>> {
    let mut out = Vec::with_capacity(m);
    let mut u = b.clone();
    for _ in 0..m {
        u = normalize_column(&a.spmv(&u)?, NORMALIZE_TOL);
        out.push(u.clone());
    }
    Ok(out)
}

/// Assembles the labeled feature matrix for a (scaled) system.
pub fn build_features(
    a: &SparseSymMatrix,
    b: &DenseVector,
    cfg: &AugmentationConfig,
) -> Result<FeatureMatrix> {
    if b.len() != a.n() {
        return Err(Error::DimensionMismatch {
            context: "feature construction",
            expected: a.n(),
            found: b.len(),
        });
    }
    let mut cols: Vec<(FeatureLabel, DenseVector)> = vec![(FeatureLabel::Rhs, b.clone())];
    if cfg.include_diagonal {
        cols.push((FeatureLabel::Diagonal, a.diagonal()));
    }
    for (k, it) in jacobi_iterates(a, b, cfg.jacobi_steps)?.into_iter().enumerate() {
        cols.push((FeatureLabel::Jacobi(k + 1), it));
    }
    for (k, it) in cg_iterates(a, b, cfg.cg_steps)?.into_iter().enumerate() {
        cols.push((FeatureLabel::Cg(k + 1), it));
    }
    for (k, it) in arnoldi_powers(a, b, cfg.arnoldi_steps)?.into_iter().enumerate() {
        cols.push((FeatureLabel::Arnoldi(k + 1), it));
    }

    let mut data = DenseMatrix::zeros(a.n(), cols.len());
    let mut labels = Vec::with_capacity(cols.len());
    for (c, (label, v)) in cols.into_iter().enumerate() {
        data.set_column(c, &normalize_column(&v, NORMALIZE_TOL));
        labels.push(label);
    }
    Ok(FeatureMatrix { data, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::normalize_system;
    use crate::test_util::{five_node_matrix, five_node_rhs, random_system, random_vector};
    use proptest::prelude::*;

    #[test]
    fn normalize_column_scales_by_max() {
        let v = normalize_column(&DenseVector::from_vec(vec![3.0, -6.0]), NORMALIZE_TOL);
        assert_eq!(v.as_slice(), &[0.5, -1.0]);
        let z = normalize_column(&DenseVector::zeros(3), NORMALIZE_TOL);
        assert!(z.is_zero());
        // Below tolerance: left alone.
        let tiny = normalize_column(&DenseVector::from_vec(vec![1e-40, 0.0]), NORMALIZE_TOL);
        assert_eq!(tiny.as_slice(), &[1e-40, 0.0]);
    }

    #[test]
    fn diagonal_channel_reads_self_loops() {
        let d = five_node_matrix().diagonal();
        assert_eq!(d.as_slice(), &[1.0, 2.2, -1.5, 3.6, -0.1]);
    }

    #[test]
    fn jacobi_iterates_by_hand() {
        let a = SparseSymMatrix::from_triplets(2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 1, 2.0)])
            .unwrap();
        let b = DenseVector::from_vec(vec![3.0, 3.0]);
        let its = jacobi_iterates(&a, &b, 2).unwrap();
        assert_eq!(its[0].as_slice(), &[1.5, 1.5]);
        assert_eq!(its[1].as_slice(), &[0.75, 0.75]);
    }

    #[test]
    fn jacobi_rejects_zero_diagonal() {
        let a = SparseSymMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        assert!(matches!(
            jacobi_iterates(&a, &DenseVector::zeros(2), 3),
            Err(Error::ZeroDiagonal { row: 1 })
        ));
    }

    #[test]
    fn cg_iterates_reach_exact_solution_in_two_steps() {
        let a = SparseSymMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 2.0)]).unwrap();
        let b = DenseVector::from_vec(vec![1.0, 2.0]);
        let its = cg_iterates(&a, &b, 4).unwrap();
        assert!((its[1][0] - 1.0).abs() < 1e-14);
        assert!((its[1][1] - 1.0).abs() < 1e-14);
        // Converged: later columns repeat.
        assert_eq!(its[2].as_slice(), its[1].as_slice());
        assert_eq!(its[3].as_slice(), its[1].as_slice());
    }

    #[test]
    fn cg_iterates_repeat_on_breakdown() {
        let a = SparseSymMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        let b = DenseVector::from_vec(vec![1.0, 1.0]);
        let its = cg_iterates(&a, &b, 3).unwrap();
        // p'Ap = 0 on the first step: nothing updates, the zero start repeats.
        for it in its {
            assert!(it.is_zero());
        }
    }

    #[test]
    fn arnoldi_powers_alternate_on_swap_matrix() {
        let a = SparseSymMatrix::from_triplets(2, vec![(0, 1, 1.0)]).unwrap();
        let b = DenseVector::from_vec(vec![1.0, 0.0]);
        let its = arnoldi_powers(&a, &b, 4).unwrap();
        assert_eq!(its[0].as_slice(), &[0.0, 1.0]);
        assert_eq!(its[1].as_slice(), &[1.0, 0.0]);
        assert_eq!(its[2].as_slice(), &[0.0, 1.0]);
        assert_eq!(its[3].as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn zero_rhs_gives_zero_columns_without_error() {
        let a = five_node_matrix();
        let b = DenseVector::zeros(5);
        let cfg = AugmentationConfig {
            include_diagonal: true,
            jacobi_steps: 2,
            cg_steps: 2,
            arnoldi_steps: 2,
        };
        let f = build_features(&a, &b, &cfg).unwrap();
        assert_eq!(f.width(), 8);
        for (c, label) in f.labels.iter().enumerate() {
            let col = f.data.column(c);
            if *label == FeatureLabel::Diagonal {
                assert!(!col.is_zero());
            } else {
                assert!(col.is_zero(), "column {label} should be zero");
            }
        }
    }

    #[test]
    fn preset_widths() {
        let cases = [
            ("none", 2),
            ("jacobi", 16),
            ("cg", 16),
            ("arnoldi", 16),
            ("cg+jacobi", 16),
            ("cg+arnoldi", 16),
        ];
        for (name, want) in cases {
            assert_eq!(AugmentationConfig::preset(name).unwrap().d_in(), want, "{name}");
        }
        assert_eq!(AugmentationConfig::default().d_in(), 16);
        assert!(AugmentationConfig::preset("bogus").is_err());
    }

    #[test]
    fn default_feature_layout() {
        let s = normalize_system(&five_node_matrix(), &five_node_rhs()).unwrap();
        let f = build_features(&s.matrix, &s.rhs, &AugmentationConfig::default()).unwrap();
        assert_eq!(f.width(), 16);
        assert_eq!(f.labels[0], FeatureLabel::Rhs);
        assert_eq!(f.labels[1], FeatureLabel::Diagonal);
        for k in 1..=14 {
            assert_eq!(f.labels[1 + k], FeatureLabel::Cg(k));
        }
        assert_eq!(f.labels[2].to_string(), "cg_1");
    }

    #[test]
    fn scaled_five_node_diagonal_column() {
        let s = normalize_system(&five_node_matrix(), &five_node_rhs()).unwrap();
        let cfg = AugmentationConfig::preset("none").unwrap();
        let f = build_features(&s.matrix, &s.rhs, &cfg).unwrap();
        let diag_col = f.data.column(1);
        // Diagonal of A_bar rescaled so its largest magnitude is exactly 1.
        assert_eq!(diag_col[3], 1.0);
        let raw = [1.0, 2.2, -1.5, 3.6, -0.1];
        for i in 0..5 {
            assert!((diag_col[i] - raw[i] / 3.6).abs() < 1e-15);
        }
        // The rhs column was already canonical.
        assert_eq!(f.data.column(0).as_slice(), s.rhs.as_slice());
    }

    proptest! {
        #[test]
        fn columns_are_finite_and_unit_max(seed in 0u64..200) {
            let (a, b) = random_system(seed, 12);
            let s = normalize_system(&a, &b).unwrap();
            let cfg = AugmentationConfig {
                include_diagonal: true,
                jacobi_steps: 3,
                cg_steps: 3,
                arnoldi_steps: 3,
            };
            let f = build_features(&s.matrix, &s.rhs, &cfg).unwrap();
            prop_assert!(f.data.is_all_finite());
            for c in 0..f.width() {
                let m = f.data.column(c).max_abs();
                prop_assert!(m == 1.0 || m == 0.0, "column {c} max {m}");
            }
        }

        #[test]
        fn features_are_permutation_equivariant(seed in 0u64..150) {
            use rand::SeedableRng;
            let (a, b) = random_system(seed, 10);
            let s = normalize_system(&a, &b).unwrap();
            let cfg = AugmentationConfig {
                include_diagonal: true,
                jacobi_steps: 2,
                cg_steps: 3,
                arnoldi_steps: 2,
            };
            let f = build_features(&s.matrix, &s.rhs, &cfg).unwrap();

            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
            let p = crate::dense::Permutation::random(a.n(), &mut rng);
            let fp = build_features(
                &s.matrix.permuted(&p).unwrap(),
                &s.rhs.permuted(&p).unwrap(),
                &cfg,
            )
            .unwrap();
            let expected = f.data.rows_permuted(&p).unwrap();
            for i in 0..a.n() {
                for c in 0..f.width() {
                    prop_assert!(
                        (fp.data.get(i, c) - expected.get(i, c)).abs()
                            <= 1e-12 * expected.get(i, c).abs().max(1.0),
                        "row {i} col {c}"
                    );
                }
            }
        }

        #[test]
        fn divergent_jacobi_stays_finite(seed in 0u64..100) {
            // Off-diagonally dominant: Jacobi diverges fast, columns must stay finite.
            let n = 6;
            let mut entries = vec![];
            for i in 0..n {
                entries.push((i, i, 1e-6));
                if i + 1 < n {
                    entries.push((i, i + 1, 1.0));
                }
            }
            let a = SparseSymMatrix::from_triplets(n, entries).unwrap();
            let b = random_vector(seed, n);
            let its = jacobi_iterates(&a, &b, 60).unwrap();
            prop_assert_eq!(its.len(), 60);
            for it in &its {
                prop_assert!(it.is_all_finite());
            }
        }
    }
}
