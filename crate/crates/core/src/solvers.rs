//! Classic solvers: conjugate gradient, Jacobi, dense Cholesky, and the
//! model-warm-started hybrid.

use std::time::{Duration, Instant};

use crate::dense::DenseVector;
use crate::error::{Error, Result};
use crate::model::{Prediction, Predictor};
use crate::sparse::SparseSymMatrix;

/// Dense fallback refuses systems larger than this.
pub const DENSE_SOLVE_CAP: usize = 4096;

/// Outcome of an iterative solve. `residual` is the true relative residual
/// `||b - A x|| / ||b||`, recomputed from the returned solution.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: DenseVector,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub wall_time: Duration,
    pub diagnostic: Option<String>,
}

pub(crate) enum CgStop {
    Converged,
    MaxIter,
    Breakdown(String),
    Callback,
}

pub(crate) struct CgRun {
    pub x: DenseVector,
    pub iterations: usize,
    pub stop: CgStop,
}

/// Conjugate gradient kernel. `on_iterate` sees every iterate after its
/// update; returning `false` stops the run. `rel_tol` is checked against the
/// recurrence residual relative to `||b||`.
pub(crate) fn cg_core(
    a: &SparseSymMatrix,
    b: &DenseVector,
    x0: Option<&DenseVector>,
    rel_tol: f64,
    max_iter: usize,
    on_iterate: &mut dyn FnMut(usize, &DenseVector) -> bool,
) -> Result<CgRun> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "cg rhs",
            expected: n,
            found: b.len(),
        });
    }
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                context: "cg initial guess",
                expected: n,
                found: x0.len(),
            });
        }
    }
    let b_norm = b.norm2();
    if b_norm == 0.0 {
        return Ok(CgRun {
            x: DenseVector::zeros(n),
            iterations: 0,
            stop: CgStop::Converged,
        });
    }
    let threshold = rel_tol * b_norm;

    let mut x = x0.cloned().unwrap_or_else(|| DenseVector::zeros(n));
    let mut r = b.sub(&a.spmv(&x)?);
    let mut rs = r.dot(&r);
    if rs.sqrt() <= threshold {
        return Ok(CgRun {
            x,
            iterations: 0,
            stop: CgStop::Converged,
        });
    }
    let mut p = r.clone();

    for k in 1..=max_iter {
        let ap = a.spmv(&p)?;
        let pap = p.dot(&ap);
        if !(pap > 0.0) || !pap.is_finite() {
            return Ok(CgRun {
                x,
                iterations: k - 1,
                stop: CgStop::Breakdown(format!(
                    "curvature p'Ap = {pap:e} at iteration {k}; matrix not positive definite?"
                )),
            });
        }
        let alpha = rs / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rs_new = r.dot(&r);
        if !rs_new.is_finite() {
            return Ok(CgRun {
                x,
                iterations: k,
                stop: CgStop::Breakdown(format!("non-finite residual at iteration {k}")),
            });
        }
        if !on_iterate(k, &x) {
            return Ok(CgRun {
                x,
                iterations: k,
                stop: CgStop::Callback,
            });
        }
        if rs_new.sqrt() <= threshold {
            return Ok(CgRun {
                x,
                iterations: k,
                stop: CgStop::Converged,
            });
        }
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Ok(CgRun {
        x,
        iterations: max_iter,
        stop: CgStop::MaxIter,
    })
}

fn finish_report(
    a: &SparseSymMatrix,
    b: &DenseVector,
    run: CgRun,
    started: Instant,
) -> Result<SolveReport> {
    let b_norm = b.norm2();
    let true_residual = if b_norm == 0.0 {
        0.0
    } else {
        b.sub(&a.spmv(&run.x)?).norm2() / b_norm
    };
    let (converged, diagnostic) = match run.stop {
        CgStop::Converged => (true, None),
        CgStop::MaxIter => (false, None),
        CgStop::Breakdown(msg) => (false, Some(msg)),
        CgStop::Callback => (false, None),
    };
    Ok(SolveReport {
        solution: run.x,
        iterations: run.iterations,
        residual: true_residual,
        converged,
        wall_time: started.elapsed(),
        diagnostic,
    })
}

/// Conjugate gradient, stopping when `||r|| <= rel_tol * ||b||`. A zero
/// right-hand side short-circuits to the zero solution.
pub fn conjugate_gradient(
    a: &SparseSymMatrix,
    b: &DenseVector,
    x0: Option<&DenseVector>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    let started = Instant::now();
    let run = cg_core(a, b, x0, rel_tol, max_iter, &mut |_, _| true)?;
    finish_report(a, b, run, started)
}

/// Conjugate gradient that hands every iterate to a callback; returning
/// false stops the run early.
pub fn conjugate_gradient_traced(
    a: &SparseSymMatrix,
    b: &DenseVector,
    x0: Option<&DenseVector>,
    rel_tol: f64,
    max_iter: usize,
    on_iterate: &mut dyn FnMut(usize, &DenseVector) -> bool,
) -> Result<SolveReport> {
    let started = Instant::now();
    let run = cg_core(a, b, x0, rel_tol, max_iter, on_iterate)?;
    finish_report(a, b, run, started)
}

/// Jacobi iteration from a zero start. Stops early (flagged unconverged) if
/// the residual grows tenfold over a ten-iteration window.
pub fn jacobi_solve(
    a: &SparseSymMatrix,
    b: &DenseVector,
    rel_tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    let started = Instant::now();
    let n = a.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "jacobi rhs",
            expected: n,
            found: b.len(),
        });
    }
    let diag = a.diagonal();
    for (i, &d) in diag.iter().enumerate() {
        if d == 0.0 {
            return Err(Error::ZeroDiagonal { row: i });
        }
    }
    let b_norm = b.norm2();
    if b_norm == 0.0 {
        return Ok(SolveReport {
            solution: DenseVector::zeros(n),
            iterations: 0,
            residual: 0.0,
            converged: true,
            wall_time: started.elapsed(),
            diagnostic: None,
        });
    }

    let mut x = DenseVector::zeros(n);
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut diagnostic = None;
    for k in 0..max_iter {
        let ax = a.spmv(&x)?;
        let r = b.sub(&ax);
        let res = r.norm2() / b_norm;
        if res <= rel_tol {
            converged = true;
            break;
        }
        if !res.is_finite() {
            diagnostic = Some(format!("non-finite residual at iteration {k}"));
            break;
        }
        if k >= 10 && res > 10.0 * history[k - 10] {
            diagnostic = Some(format!(
                "diverging: residual grew from {:e} to {res:e} over 10 iterations",
                history[k - 10]
            ));
            break;
        }
        history.push(res);
        for i in 0..n {
            x[i] += r[i] / diag[i];
        }
        iterations = k + 1;
    }

    let final_res = b.sub(&a.spmv(&x)?).norm2() / b_norm;
    if !converged && diagnostic.is_none() && final_res <= rel_tol {
        converged = true;
    }
    Ok(SolveReport {
        solution: x,
        iterations,
        residual: final_res,
        converged,
        wall_time: started.elapsed(),
        diagnostic,
    })
}

/// Direct solve via dense Cholesky (LL^T). Refuses `n > cap`; fails on
/// non-positive pivots.
pub fn dense_cholesky_solve_capped(
    a: &SparseSymMatrix,
    b: &DenseVector,
    cap: usize,
) -> Result<DenseVector> {
    let n = a.n();
    if n > cap {
        return Err(Error::DenseCapExceeded { n, cap });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "cholesky rhs",
            expected: n,
            found: b.len(),
        });
    }
    let mut l = a.to_dense();
    for j in 0..n {
        let mut d = l.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { row: j, pivot: d });
        }
        let root = d.sqrt();
        l.set(j, j, root);
        for i in (j + 1)..n {
            let mut s = l.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / root);
        }
    }
    // Forward substitution L y = b, then back substitution L^T x = y.
    let mut y = DenseVector::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = DenseVector::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Ok(x)
}

pub fn dense_cholesky_solve(a: &SparseSymMatrix, b: &DenseVector) -> Result<DenseVector> {
    dense_cholesky_solve_capped(a, b, DENSE_SOLVE_CAP)
}

/// A model-warm-started CG run next to a zero-started one, on the same system
/// with the same stopping rule.
#[derive(Debug, Clone)]
pub struct HybridReport {
    pub prediction: Prediction,
    pub warm: SolveReport,
    pub cold: SolveReport,
}

pub fn hybrid_solve(
    a: &SparseSymMatrix,
    b: &DenseVector,
    predictor: &dyn Predictor,
    rel_tol: f64,
    max_iter: usize,
) -> Result<HybridReport> {
    let prediction = predictor.predict(a, b)?;
    let warm = conjugate_gradient(a, b, Some(&prediction.x_hat), rel_tol, max_iter)?;
    let cold = conjugate_gradient(a, b, None, rel_tol, max_iter)?;
    Ok(HybridReport {
        prediction,
        warm,
        cold,
    })
}
