//! Scale canonicalization and magnitude recovery.
//!
//! The network only ever sees the scaled system `(A/s_A, b/s_b)` with
//! `s_A = max|a_ij|`, `s_b = max|b_i|`, so its input is invariant to a
//! rescaling of either side. The predicted direction `x~` gets its magnitude
//! back in closed form: `mu = <A_bar x~, b_bar> / ||A_bar x~||^2` minimizes the
//! scaled residual over step lengths, and `x_hat = mu * (s_b / s_A) * x~`.

use crate::dense::DenseVector;
use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

/// Directions with `||A_bar x~|| <= this` are treated as degenerate.
pub const MU_DEGENERATE_TOL: f64 = 1e-150;

/// A system together with its canonical form and the scales taken out.
#[derive(Debug, Clone)]
pub struct ScaledSystem {
    /// `A / matrix_scale`; largest magnitude exactly 1 unless `A == 0`.
    pub matrix: SparseSymMatrix,
    /// `b / rhs_scale`; largest magnitude exactly 1 unless `b == 0`.
    pub rhs: DenseVector,
    pub matrix_scale: f64,
    pub rhs_scale: f64,
}

pub fn normalize_system(a: &SparseSymMatrix, b: &DenseVector) -> Result<ScaledSystem> {
    if b.len() != a.n() {
        return Err(Error::DimensionMismatch {
            context: "system scaling",
            expected: a.n(),
            found: b.len(),
        });
    }
    let matrix_scale = a.max_abs();
    let rhs_scale = b.max_abs();
    let matrix = if matrix_scale > 0.0 {
        a.divided(matrix_scale)
    } else {
        a.clone()
    };
    let rhs = if rhs_scale > 0.0 {
        b.divided(rhs_scale)
    } else {
        b.clone()
    };
    Ok(ScaledSystem {
        matrix,
        rhs,
        matrix_scale,
        rhs_scale,
    })
}

/// Least-squares step length for a predicted direction.
#[derive(Debug, Clone, Copy)]
pub struct MuEstimate {
    pub value: f64,
    /// Set when `A_bar x~` was too small to divide by; `value` is then 0.
    pub degenerate: bool,
}

pub fn estimate_mu(scaled: &ScaledSystem, direction: &DenseVector) -> Result<MuEstimate> {
    let w = scaled.matrix.spmv(direction)?;
    let denom = w.dot(&w);
    if denom.sqrt() <= MU_DEGENERATE_TOL {
        return Ok(MuEstimate {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(MuEstimate {
        value: w.dot(&scaled.rhs) / denom,
        degenerate: false,
    })
}

/// `x_hat = mu * (rhs_scale / matrix_scale) * direction`; the zero vector when
/// the direction is degenerate, `b == 0`, or `A == 0`.
pub fn recover_solution(scaled: &ScaledSystem, direction: &DenseVector) -> Result<DenseVector> {
    let mu = estimate_mu(scaled, direction)?;
    Ok(apply_magnitude(scaled, direction, &mu))
}

/// Rescales a direction with an already computed step length.
pub fn apply_magnitude(
    scaled: &ScaledSystem,
    direction: &DenseVector,
    mu: &MuEstimate,
) -> DenseVector {
    if mu.degenerate || scaled.rhs_scale == 0.0 || scaled.matrix_scale == 0.0 {
        return DenseVector::zeros(direction.len());
    }
    direction.scaled(mu.value * scaled.rhs_scale / scaled.matrix_scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{five_node_matrix, five_node_rhs, random_system, random_vector};
    use proptest::prelude::*;

    #[test]
    fn canonical_form_has_unit_max() {
        let s = normalize_system(&five_node_matrix(), &five_node_rhs()).unwrap();
        assert_eq!(s.matrix_scale, 4.1);
        assert_eq!(s.rhs_scale, 5.4);
        assert_eq!(s.matrix.max_abs(), 1.0);
        assert_eq!(s.rhs.max_abs(), 1.0);
        assert_eq!(s.matrix.get(1, 2), 1.0);
        // Plain division, entry by entry.
        assert_eq!(s.matrix.get(0, 1), 0.5 / 4.1);
        assert_eq!(s.rhs[0], 2.7 / 5.4);
    }

    #[test]
    fn zero_inputs_pass_through() {
        let a = SparseSymMatrix::from_triplets(3, vec![]).unwrap();
        let b = DenseVector::zeros(3);
        let s = normalize_system(&a, &b).unwrap();
        assert_eq!(s.matrix_scale, 0.0);
        assert_eq!(s.rhs_scale, 0.0);
        assert_eq!(s.matrix.stored_nnz(), 0);
        assert!(s.rhs.is_zero());
    }

    #[test]
    fn power_of_two_rescaling_is_exact() {
        let (a, _) = random_system(17, 12);
        let b = random_vector(18, a.n());
        let s1 = normalize_system(&a, &b).unwrap();
        let s2 = normalize_system(&a.scaled(1024.0), &b.scaled(1.0 / 128.0)).unwrap();
        assert_eq!(s1.matrix, s2.matrix);
        for (x, y) in s1.rhs.iter().zip(s2.rhs.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(s2.matrix_scale, 1024.0 * s1.matrix_scale);
        assert_eq!(s2.rhs_scale, s1.rhs_scale / 128.0);
    }

    #[test]
    fn mu_closed_form() {
        // A_bar = I, b_bar = (0.75, 1), x~ = (1.5, 2) => mu = 0.5.
        let s = ScaledSystem {
            matrix: SparseSymMatrix::identity(2),
            rhs: DenseVector::from_vec(vec![0.75, 1.0]),
            matrix_scale: 1.0,
            rhs_scale: 1.0,
        };
        let mu = estimate_mu(&s, &DenseVector::from_vec(vec![1.5, 2.0])).unwrap();
        assert!(!mu.degenerate);
        assert_eq!(mu.value, 0.5);
    }

    #[test]
    fn mu_flags_degenerate_directions() {
        let s = normalize_system(&five_node_matrix(), &five_node_rhs()).unwrap();
        let mu = estimate_mu(&s, &DenseVector::zeros(5)).unwrap();
        assert!(mu.degenerate);
        assert_eq!(mu.value, 0.0);
        assert!(recover_solution(&s, &DenseVector::zeros(5)).unwrap().is_zero());
    }

    #[test]
    fn recovery_rebuilds_exact_solution() {
        // A = I, b = (3, 4): a direction parallel to b recovers b itself.
        let a = SparseSymMatrix::identity(2);
        let b = DenseVector::from_vec(vec![3.0, 4.0]);
        let s = normalize_system(&a, &b).unwrap();
        let x = recover_solution(&s, &DenseVector::from_vec(vec![0.75, 1.0])).unwrap();
        assert_eq!(x.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn zero_rhs_recovers_zero() {
        let a = five_node_matrix();
        let b = DenseVector::zeros(5);
        let s = normalize_system(&a, &b).unwrap();
        let x = recover_solution(&s, &DenseVector::from_vec(vec![1.0; 5])).unwrap();
        assert!(x.is_zero());
    }

    proptest! {
        #[test]
        fn recovered_solution_ignores_direction_magnitude(seed in 0u64..200, c in 1e-6f64..1e6) {
            let (a, b) = random_system(seed, 12);
            let s = normalize_system(&a, &b).unwrap();
            let dir = random_vector(seed ^ 0x123, a.n());
            let x1 = recover_solution(&s, &dir).unwrap();
            let x2 = recover_solution(&s, &dir.scaled(c)).unwrap();
            for i in 0..a.n() {
                prop_assert!((x1[i] - x2[i]).abs() <= 1e-10 * x1[i].abs().max(1e-12));
            }
        }

        #[test]
        fn mu_minimizes_scaled_residual(seed in 0u64..200) {
            // Perturbing mu in either direction cannot shrink ||A_bar(mu x~) - b_bar||.
            let (a, b) = random_system(seed, 12);
            let s = normalize_system(&a, &b).unwrap();
            let dir = random_vector(seed ^ 0x456, a.n());
            let mu = estimate_mu(&s, &dir).unwrap();
            prop_assume!(!mu.degenerate);
            let res_at = |m: f64| {
                let w = s.matrix.spmv(&dir.scaled(m)).unwrap();
                w.sub(&s.rhs).norm2()
            };
            let base = res_at(mu.value);
            for delta in [1e-3, -1e-3, 0.1, -0.1] {
                prop_assert!(res_at(mu.value * (1.0 + delta) + delta) >= base - 1e-9);
            }
        }

        #[test]
        fn pipeline_rescales_exactly_for_powers_of_two(seed in 0u64..100, ka in -20i32..20, kb in -20i32..20) {
            // With a canonical-form-only "model" (here: direction = b_bar), the
            // recovered solution of (2^ka A, 2^kb b) is 2^(kb-ka) times that of (A, b).
            let (a, b) = random_system(seed, 10);
            let ca = (2.0f64).powi(ka);
            let cb = (2.0f64).powi(kb);
            let s1 = normalize_system(&a, &b).unwrap();
            let s2 = normalize_system(&a.scaled(ca), &b.scaled(cb)).unwrap();
            prop_assert_eq!(&s1.matrix, &s2.matrix);
            let x1 = recover_solution(&s1, &s1.rhs.clone()).unwrap();
            let x2 = recover_solution(&s2, &s2.rhs.clone()).unwrap();
            let ratio = cb / ca;
            for i in 0..a.n() {
                prop_assert_eq!((x1[i] * ratio).to_bits(), x2[i].to_bits());
            }
        }
    }
}
