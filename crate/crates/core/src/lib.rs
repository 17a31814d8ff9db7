//! Learned approximate solver for sparse symmetric linear systems.
//!
//! A system `Ax = b` is encoded as a weighted graph (one node per unknown,
//! one edge per nonzero coefficient), a graph network predicts the direction
//! of the solution, and a closed-form least-squares step recovers its
//! magnitude. Classic iterative solvers live alongside the model, both as
//! baselines and as consumers of the prediction (warm-started CG).
//!
//! Modules, roughly bottom-up:
//!
//! * [`dense`], [`sparse`]: vectors, matrices, permutations, and the
//!   symmetric sparse kernels everything else is built on.
//! * [`mm`]: Matrix Market I/O.
//! * [`graph`]: the system-as-graph view.
//! * [`scaling`]: scale canonicalization and magnitude recovery.
//! * [`augment`]: input feature construction (diagonal, Jacobi/CG/Arnoldi
//!   iterates).
//! * [`model`]: the graph network, parameter init, checkpoints, inference.
//! * [`train`]: losses, analytic gradients, Adam, the training loop, and the
//!   finite-difference gradient checker.
//! * [`solvers`]: CG, Jacobi, dense Cholesky, and the hybrid solve.
//! * [`dataset`]: sample generators, on-disk layout, manifests, splits.
//! * [`eval`]: metrics, evaluation reports, ablations, benchmarks.

pub mod augment;
#[cfg(test)]
pub(crate) mod test_util;
pub mod dataset;
pub mod dense;
pub mod error;
pub mod eval;
pub mod graph;
pub mod mm;
pub mod model;
pub mod scaling;
pub mod solvers;
pub mod sparse;
pub mod train;

pub use dense::{DenseMatrix, DenseVector, Permutation};
pub use error::{Error, Result};
pub use sparse::SparseSymMatrix;
