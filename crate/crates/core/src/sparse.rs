//! Row-compressed sparse matrices and a preconditioned BiCGSTAB solver.
//!
//! The assembled systems are nonsymmetric (general A, convection term) and
//! occasionally bordered by a dense zero-mean row, so the solver stack is
//! ILU(0)-preconditioned BiCGSTAB with restart on breakdown. The solve
//! contract is the relative residual, checked on the true residual vector.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from triplets, summing duplicates. Entries are accumulated in
    /// insertion order within each (row, col) slot, so assembly is bitwise
    /// deterministic for a fixed triplet order.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k];
            debug_assert!(r < n_rows && c < n_cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
    }

    /// y = A^T x without forming the transpose.
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(y.len(), self.n_cols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * x[r];
            }
        }
    }

    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n_rows];
        self.matvec(x, &mut ax);
        ax.iter()
            .zip(b)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute asymmetry |a_ij - a_ji| over the pattern.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                let vt = self.get(*c, r).unwrap_or(0.0);
                worst = worst.max((v - vt).abs());
            }
        }
        worst
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).ok().map(|k| vals[k])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// ILU(0) factorization sharing the matrix pattern.
pub struct Ilu0 {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    lu: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Self {
        let n = a.n_rows;
        let row_ptr = a.row_ptr.clone();
        let col_idx = a.col_idx.clone();
        let mut lu = a.values.clone();
        let mut diag = vec![usize::MAX; n];
        for r in 0..n {
            for k in row_ptr[r]..row_ptr[r + 1] {
                if col_idx[k] == r {
                    diag[r] = k;
                }
            }
        }
        let max_diag = diag
            .iter()
            .filter(|&&d| d != usize::MAX)
            .map(|&d| lu[d].abs())
            .fold(0.0f64, f64::max);
        let pivot_floor = 1e-14 * max_diag.max(1.0);

        // IKJ variant with a column-position workspace per row.
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = k;
            }
            let mut k = row_ptr[i];
            while k < row_ptr[i + 1] {
                let kc = col_idx[k];
                if kc >= i {
                    break;
                }
                // Eliminate column kc using row kc.
                let dk = diag[kc];
                if dk == usize::MAX {
                    // Row kc has no stored diagonal; leave this entry to the
                    // incomplete part of the factorization.
                    k += 1;
                    continue;
                }
                let mut pivot = lu[dk];
                if pivot.abs() < pivot_floor {
                    pivot = if pivot >= 0.0 { pivot_floor } else { -pivot_floor };
                }
                let factor = lu[k] / pivot;
                lu[k] = factor;
                for j in dk + 1..row_ptr[kc + 1] {
                    let jc = col_idx[j];
                    if pos[jc] != usize::MAX {
                        lu[pos[jc]] -= factor * lu[j];
                    }
                }
                k += 1;
            }
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = usize::MAX;
            }
        }
        Ilu0 {
            row_ptr,
            col_idx,
            lu,
            diag,
        }
    }

    /// z = U^-1 L^-1 x.
    pub fn apply(&self, x: &[f64], z: &mut [f64]) {
        let n = self.diag.len();
        z.copy_from_slice(x);
        // Forward: L has unit diagonal.
        for i in 0..n {
            let mut acc = z[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[k];
                if c >= i {
                    break;
                }
                acc -= self.lu[k] * z[c];
            }
            z[i] = acc;
        }
        // Backward.
        for i in (0..n).rev() {
            let d = self.diag[i];
            if d == usize::MAX {
                continue;
            }
            let mut acc = z[i];
            for k in d + 1..self.row_ptr[i + 1] {
                acc -= self.lu[k] * z[self.col_idx[k]];
            }
            let mut pivot = self.lu[d];
            if pivot == 0.0 {
                pivot = 1e-30;
            }
            z[i] = acc / pivot;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve A x = b with ILU(0)-preconditioned BiCGSTAB to a relative residual.
///
/// Right preconditioning keeps the iterated residual equal to the true
/// residual b - A x; the convergence test therefore enforces the contract
/// directly. Breakdown triggers a restart from the current iterate.
pub fn solve_bicgstab(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = a.n_rows();
    assert_eq!(n, a.n_cols(), "solver needs a square system");
    assert_eq!(b.len(), n);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let target = tol * b_norm;
    let ilu = Ilu0::new(a);

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let max_iter = 400 + 4 * n;
    let mut total_iter = 0usize;

    for _restart in 0..6 {
        let r_hat = r.clone();
        let mut rho = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut p_hat = vec![0.0; n];
        let mut s_hat = vec![0.0; n];
        let mut t = vec![0.0; n];
        let mut broke = false;

        while total_iter < max_iter {
            total_iter += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < 1e-300 {
                broke = true;
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            ilu.apply(&p, &mut p_hat);
            a.matvec(&p_hat, &mut v);
            let denom = dot(&r_hat, &v);
            if denom.abs() < 1e-300 {
                broke = true;
                break;
            }
            alpha = rho / denom;
            // s = r - alpha v (reuse r).
            for i in 0..n {
                r[i] -= alpha * v[i];
            }
            if norm(&r) <= target {
                for i in 0..n {
                    x[i] += alpha * p_hat[i];
                }
                break;
            }
            ilu.apply(&r, &mut s_hat);
            a.matvec(&s_hat, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                broke = true;
                break;
            }
            omega = dot(&t, &r) / tt;
            if omega == 0.0 {
                broke = true;
                break;
            }
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] -= omega * t[i];
            }
            if norm(&r) <= target {
                break;
            }
        }

        // Recompute the true residual; rounding drift or breakdown both
        // land here.
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        let res = norm(&r);
        if res <= target {
            return Ok(x);
        }
        if !broke && total_iter >= max_iter {
            return Err(Error::SolverBreakdown {
                residual: res / b_norm,
                iterations: total_iter,
            });
        }
    }

    let res = a.residual_norm(&x, b) / b_norm;
    Err(Error::SolverBreakdown {
        residual: res,
        iterations: total_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(5);
        let b = vec![3.0, -1.0, 0.5, 2.0, 7.0];
        let x = solve_bicgstab(&a, &b, 1e-12).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let a = CsrMatrix::identity(4);
        let x = solve_bicgstab(&a, &[0.0; 4], 1e-12).unwrap();
        assert_eq!(x, vec![0.0; 4]);
    }

    #[test]
    fn nonsymmetric_small_system() {
        // [[4,1,0],[2,5,1],[0,-1,3]] x = b with x = (1,2,3).
        let triplets = [
            (0usize, 0usize, 4.0),
            (0, 1, 1.0),
            (1, 0, 2.0),
            (1, 1, 5.0),
            (1, 2, 1.0),
            (2, 1, -1.0),
            (2, 2, 3.0),
        ];
        let a = CsrMatrix::from_triplets(3, 3, &triplets);
        let b = vec![6.0, 15.0, 7.0];
        let x = solve_bicgstab(&a, &b, 1e-12).unwrap();
        for (xi, want) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((xi - want).abs() < 1e-10, "x = {x:?}");
        }
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let triplets = [(0usize, 0usize, 1.0), (0, 0, 2.0), (1, 1, 4.0)];
        let a = CsrMatrix::from_triplets(2, 2, &triplets);
        assert_eq!(a.get(0, 0), Some(3.0));
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn bordered_saddle_system_solves() {
        // Laplacian-like singular block bordered by a mean row, as used by
        // the zero-mean constraint.
        let mut triplets = Vec::new();
        let n = 50usize;
        for i in 0..n {
            triplets.push((i, i, 2.0));
            triplets.push((i, (i + 1) % n, -1.0));
            triplets.push(((i + 1) % n, i, -1.0));
            triplets.push((i, n, 1.0));
            triplets.push((n, i, 1.0));
        }
        triplets.push((n, n, 0.0));
        let a = CsrMatrix::from_triplets(n + 1, n + 1, &triplets);
        let mut b = vec![0.0; n + 1];
        // Compatible load: zero sum.
        b[0] = 1.0;
        b[1] = -1.0;
        let x = solve_bicgstab(&a, &b, 1e-12).unwrap();
        assert!(a.residual_norm(&x, &b) <= 1e-12 * norm(&b) + 1e-15);
        // Mean of the solution part is pinned to zero.
        let mean: f64 = x[..n].iter().sum();
        assert!(mean.abs() < 1e-9);
    }
}
