//! The system-as-graph view: one node per unknown carrying `b_i`, one
//! undirected edge per nonzero coefficient (diagonal entries become
//! self-loops) carrying `a_ij`. Conversion is lossless in both directions.

use crate::dense::{DenseVector, Permutation};
use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Weighted graph encoding of a symmetric system `A x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemGraph {
    matrix: SparseSymMatrix,
    features: DenseVector,
}

impl SystemGraph {
    pub fn from_system(matrix: SparseSymMatrix, rhs: DenseVector) -> Result<Self> {
        if rhs.len() != matrix.n() {
            return Err(Error::DimensionMismatch {
                context: "graph construction",
                expected: matrix.n(),
                found: rhs.len(),
            });
        }
        Ok(SystemGraph {
            matrix,
            features: rhs,
        })
    }

    pub fn node_count(&self) -> usize {
        self.matrix.n()
    }

    pub fn node_feature(&self, i: usize) -> f64 {
        self.features[i]
    }

    pub fn features(&self) -> &DenseVector {
        &self.features
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.matrix
    }

    /// Edges with `u <= v`; `u == v` is a self-loop.
    pub fn edges(&self) -> impl Iterator<Item = GraphEdge> + '_ {
        self.matrix
            .triplets()
            .iter()
            .map(|&(u, v, weight)| GraphEdge { u, v, weight })
    }

    pub fn edge_count(&self) -> usize {
        self.matrix.stored_nnz()
    }

    /// `Some(weight)` iff the coefficient is nonzero.
    pub fn edge_weight(&self, i: usize, j: usize) -> Option<f64> {
        let w = self.matrix.get(i, j);
        (w != 0.0).then_some(w)
    }

    pub fn to_system(&self) -> (&SparseSymMatrix, &DenseVector) {
        (&self.matrix, &self.features)
    }

    pub fn into_system(self) -> (SparseSymMatrix, DenseVector) {
        (self.matrix, self.features)
    }

    /// Relabels nodes: node `p(i)` of the result is node `i` of the input.
    pub fn permuted(&self, p: &Permutation) -> Result<SystemGraph> {
        Ok(SystemGraph {
            matrix: self.matrix.permuted(p)?,
            features: self.features.permuted(p)?,
        })
    }

    /// Human-readable dump, 1-based: node features first, then the weighted
    /// edge list (self-loops written as `i-i`).
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let loops = self.edges().filter(|e| e.u == e.v).count();
        let mut out = String::new();
        writeln!(
            out,
            "graph with {} nodes, {} edges ({} self-loops)",
            self.node_count(),
            self.edge_count(),
            loops
        )
        .unwrap();
        for i in 0..self.node_count() {
            writeln!(out, "node {}: b = {}", i + 1, self.features[i]).unwrap();
        }
        for e in self.edges() {
            writeln!(out, "edge {}-{}: {}", e.u + 1, e.v + 1, e.weight).unwrap();
        }
        out
    }
}
