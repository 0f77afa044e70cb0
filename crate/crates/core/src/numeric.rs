//! Sparse matrices and the conjugate-gradient solver shared by the albedo
//! step and the height-field Gauss-Newton solve.
//!
//! Everything here is deterministic: matrix-vector products are computed
//! row-by-row (parallel over rows, each row summed in column order) and the
//! CG recurrences are sequential, so repeated runs are bit-identical.

use rayon::prelude::*;

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Builder accumulating triplets in row order.
#[derive(Debug, Default)]
pub struct CsrBuilder {
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrBuilder {
    pub fn new(n_cols: usize) -> Self {
        CsrBuilder {
            n_cols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Append one row given as (column, value) pairs. Columns need not be
    /// sorted; duplicates are summed on finish.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        let mut sorted: Vec<(usize, f64)> = entries.to_vec();
        sorted.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(sorted.len());
        for (c, v) in sorted {
            debug_assert!(c < self.n_cols);
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        for (c, v) in merged {
            self.col_idx.push(c);
            self.values.push(v);
        }
        self.row_ptr.push(self.col_idx.len());
    }

    pub fn finish(self) -> CsrMatrix {
        CsrMatrix {
            n_rows: self.row_ptr.len() - 1,
            n_cols: self.n_cols,
            row_ptr: self.row_ptr,
            col_idx: self.col_idx,
            values: self.values,
        }
    }
}

impl CsrMatrix {
    /// y = A x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .into_par_iter()
            .map(|r| {
                let mut acc = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.values[k] * x[self.col_idx[k]];
                }
                acc
            })
            .collect()
    }

    /// Explicit transpose (CSC of self stored as CSR).
    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols];
        for &c in &self.col_idx {
            counts[c] += 1;
        }
        let mut row_ptr = vec![0usize; self.n_cols + 1];
        for c in 0..self.n_cols {
            row_ptr[c + 1] = row_ptr[c] + counts[c];
        }
        let mut col_idx = vec![0usize; self.col_idx.len()];
        let mut values = vec![0.0; self.values.len()];
        let mut next = row_ptr.clone();
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let dst = next[c];
                col_idx[dst] = r;
                values[dst] = self.values[k];
                next[c] += 1;
            }
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Symmetric positive (semi-)definite linear operator for CG.
pub trait SpdOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl SpdOperator for CsrMatrix {
    fn dim(&self) -> usize {
        debug_assert_eq!(self.n_rows, self.n_cols);
        self.n_rows
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.mul_vec(x)
    }
}

/// Gauss-Newton normal equations (JᵀJ + λI) without forming the product.
pub struct NormalEqOperator<'a> {
    pub jacobian: &'a CsrMatrix,
    pub jacobian_t: &'a CsrMatrix,
    pub damping: f64,
}

impl SpdOperator for NormalEqOperator<'_> {
    fn dim(&self) -> usize {
        self.jacobian.n_cols
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let jx = self.jacobian.mul_vec(x);
        let mut y = self.jacobian_t.mul_vec(&jx);
        if self.damping != 0.0 {
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi += self.damping * xi;
            }
        }
        y
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradient for A x = b with A symmetric positive semi-definite.
///
/// Stops when ‖r‖/‖b‖ drops below `rel_tol` or after `max_iters`. Returns a
/// breakdown flag through `converged = false` when the curvature pᵀAp is not
/// positive, which signals an indefinite or singular operator.
pub fn conjugate_gradient(
    op: &dyn SpdOperator,
    b: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> CgResult {
    conjugate_gradient_precond(op, b, x0, None, rel_tol, max_iters)
}

/// Jacobi-preconditioned conjugate gradient; `precond_diag` is the diagonal
/// of A (entries <= 0 fall back to 1).
pub fn conjugate_gradient_precond(
    op: &dyn SpdOperator,
    b: &[f64],
    x0: &[f64],
    precond_diag: Option<&[f64]>,
    rel_tol: f64,
    max_iters: usize,
) -> CgResult {
    let n = op.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x0.len(), n);
    let inv_diag: Option<Vec<f64>> = precond_diag.map(|d| {
        d.iter()
            .map(|&v| if v > 0.0 { 1.0 / v } else { 1.0 })
            .collect()
    });
    let apply_m = |r: &[f64]| -> Vec<f64> {
        match &inv_diag {
            Some(m) => r.iter().zip(m).map(|(ri, mi)| ri * mi).collect(),
            None => r.to_vec(),
        }
    };
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return CgResult {
            solution: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut x = x0.to_vec();
    let ax = op.apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let mut z = apply_m(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    for _ in 0..max_iters {
        let rel = dot(&r, &r).sqrt() / b_norm;
        if rel < rel_tol {
            break;
        }
        let ap = op.apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            return CgResult {
                solution: x,
                iterations,
                relative_residual: rel,
                converged: false,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = apply_m(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
        iterations += 1;
    }
    let rel = dot(&r, &r).sqrt() / b_norm;
    CgResult {
        solution: x,
        iterations,
        relative_residual: rel,
        converged: rel < rel_tol,
    }
}

/// FNV-1a hash of a byte slice, used for content fingerprints in manifests.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
