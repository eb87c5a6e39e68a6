//! Small sparse and dense linear-algebra kernels used by the solvers.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Solves a tridiagonal system; `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::SingularSystem(0));
    }
    c[0] = if n > 1 { upper[0] / beta } else { 0.0 };
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::SingularSystem(i));
        }
        if i + 1 < n {
            c[i] = upper[i] / beta;
        }
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Least-squares coefficients for `y ≈ Σ coef_j cols_j`, by modified
/// Gram-Schmidt with one reorthogonalization pass.
pub fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let m = cols.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut r = vec![vec![0.0; m]; m];
    for j in 0..m {
        let mut v = cols[j].clone();
        for _pass in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let proj = dot(qi, &v);
                r[i][j] += proj;
                axpy(-proj, qi, &mut v);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::SingularSystem(j));
        }
        r[j][j] = norm;
        v.iter_mut().for_each(|x| *x /= norm);
        q.push(v);
    }
    let qty: Vec<f64> = q.iter().map(|qi| dot(qi, y)).collect();
    let mut coef = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|k| r[i][k] * coef[k]).sum();
        coef[i] = (qty[i] - s) / r[i][i];
    }
    Ok(coef)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Row count above which matrix-vector products run in parallel.
const PARALLEL_ROWS: usize = 20_000;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from rows given as `(column, value)` lists.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows.iter().cloned() {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { nrows: rows.len(), ncols, indptr, indices, values }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let dot_row = |i: usize| self.row(i).map(|(c, v)| v * x[c]).sum();
        if self.nrows >= PARALLEL_ROWS {
            (0..self.nrows).into_par_iter().map(dot_row).collect()
        } else {
            (0..self.nrows).map(dot_row).collect()
        }
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                rows[c].push((i, v));
            }
        }
        Self::from_rows(self.nrows, rows)
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                out[c] += v * y[i];
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite operator given as a closure.
pub fn conjugate_gradient<A>(apply: A, inv_diag: &[f64], b: &[f64], tol: f64, max_iter: usize) -> Result<CgResult>
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgResult { x, iterations: 0, relative_residual: 0.0 });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverStagnation { iterations: it, residual: norm2(&r) / bnorm });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rel = norm2(&r) / bnorm;
        if rel <= tol {
            return Ok(CgResult { x, iterations: it, relative_residual: rel });
        }
        z.iter_mut().zip(r.iter().zip(inv_diag)).for_each(|(zi, (ri, di))| *zi = ri * di);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::SolverStagnation { iterations: max_iter, residual: norm2(&r) / bnorm })
}

/// Cholesky factor of a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    /// `l[i][k]` holds `L[i][i - bw + k]`.
    l: Vec<Vec<f64>>,
}

impl BandCholesky {
    /// Factors the matrix whose entries inside the band are given by `entry(i, j)`, `j <= i`.
    pub fn factor<F: Fn(usize, usize) -> f64>(n: usize, bw: usize, entry: F) -> Result<Self> {
        let mut l = vec![vec![0.0; bw + 1]; n];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = entry(i, j);
                let k0 = i.saturating_sub(bw).max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= l[i][k + bw - i] * l[j][k + bw - j];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::SingularSystem(i));
                    }
                    l[i][bw] = s.sqrt();
                } else {
                    l[i][j + bw - i] = s / l[j][bw];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i][k + bw - i] * y[k];
            }
            y[i] = s / self.l[i][bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l[k][i + bw - k] * y[k];
            }
            y[i] = s / self.l[i][bw];
        }
        y
    }
}

/// LQ factorization `B = [Λ 0] Qᵀ` of a wide banded matrix by Givens rotations.
///
/// Row `i` may only touch columns `i..=i + u`. Gives the minimum-norm
/// solution of `B y = g` while working with the conditioning of `B` rather
/// than that of `B Bᵀ`.
#[derive(Debug, Clone)]
pub struct BandLq {
    m: usize,
    n: usize,
    u: usize,
    /// `lower[i][k]` holds `Λ[i][i - u + k]` for `k ≤ u`.
    lower: Vec<Vec<f64>>,
    /// `(i, j, c, s)` in application order.
    rotations: Vec<(usize, usize, f64, f64)>,
}

impl BandLq {
    /// `rows[i]` lists `(column, value)` pairs of row `i`.
    pub fn factor(n: usize, u: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let m = rows.len();
        if m > n {
            return Err(Error::InvalidInput(format!("LQ needs a wide matrix, got {m} x {n}")));
        }
        let width = 2 * u + 1;
        // Window of row i covers columns i - u ..= i + u.
        let mut b = vec![vec![0.0; width]; m];
        for (i, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                if c < i || c > i + u || c >= n {
                    return Err(Error::InvalidInput(format!("entry ({i}, {c}) lies outside the band")));
                }
                b[i][c + u - i] += v;
            }
        }
        let mut rotations = Vec::with_capacity(m * u);
        for i in 0..m {
            for j in i + 1..=(i + u).min(n - 1) {
                let x = b[i][u];
                let y = b[i][j + u - i];
                if y == 0.0 {
                    continue;
                }
                let r = x.hypot(y);
                let (c, s) = (x / r, y / r);
                for row in i..(i + u + 1).min(m) {
                    let ka = i + u - row;
                    let kj = j + u - row;
                    let (va, vj) = (b[row][ka], b[row][kj]);
                    b[row][ka] = c * va + s * vj;
                    b[row][kj] = -s * va + c * vj;
                }
                rotations.push((i, j, c, s));
            }
            if !(b[i][u].abs() > 0.0) {
                return Err(Error::SingularSystem(i));
            }
        }
        let lower = b.into_iter().map(|r| r[..=u].to_vec()).collect();
        Ok(Self { m, n, u, lower, rotations })
    }

    /// Minimum-norm `y` with `B y = g`.
    pub fn solve_min_norm(&self, g: &[f64]) -> Vec<f64> {
        let u = self.u;
        let mut y = vec![0.0; self.n];
        for i in 0..self.m {
            let mut s = g[i];
            for k in i.saturating_sub(u)..i {
                s -= self.lower[i][k + u - i] * y[k];
            }
            y[i] = s / self.lower[i][u];
        }
        for &(i, j, c, s) in self.rotations.iter().rev() {
            let (a, b) = (y[i], y[j]);
            y[i] = c * a - s * b;
            y[j] = s * a + c * b;
        }
        y
    }
}
