//! Discrete linearization `L = Δ + p ū^(p-1)` and its adjoint-range right inverse.
//!
//! Unknowns are the grid values away from the outer Dirichlet boundary.
//! Nodes on the singular set (the innermost radius, or the snapped points of
//! a box grid) carry an unknown but no equation, so `L` has more columns than
//! rows. The right inverse is `G f = D Lᵀ (L D Lᵀ)⁻¹ f` with the diagonal
//! weight `D = diag(ρ^(-2δ_ν) / q)`, `q` being the quadrature volume of a
//! node. Its output lies in the range of the weighted adjoint, which fixes
//! the kernel directions of `L`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glue::{Domain, Glued, SingularSpec};
use crate::linalg::{conjugate_gradient, BandLq, CsrMatrix};
use crate::params::{DerivedConstants, WeightSelection};
use crate::radial_profile::RadialProfile;

/// Grid geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Geometry {
    /// Unknown `k` sits at `r = exp(s0 + k h)`; the node `k = len` is the
    /// Dirichlet boundary `r_out`.
    Radial1d { s0: f64, h: f64, len: usize },
    /// `n³` nodes with spacing `h` starting at `lo`; the outer layer is Dirichlet.
    Box3d { n: usize, lo: [f64; 3], h: f64 },
}

/// Nodes, weights and the split into equations and free unknowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub geometry: Geometry,
    /// Space dimension `N`.
    pub dim: usize,
    /// Unknown positions; radial grids store `[r, 0, 0]`.
    pub nodes: Vec<[f64; 3]>,
    /// `ρ` at each unknown, floored at half a cell on the singular set.
    pub rho: Vec<f64>,
    /// Quadrature volume of each unknown.
    pub quadrature: Vec<f64>,
    /// Unknowns on the singular set; they carry no equation.
    pub free: Vec<usize>,
    /// Unknown index of each equation row.
    pub rows: Vec<usize>,
    /// For each unknown, the index of the nearest singular point.
    pub owner: Vec<usize>,
}

impl Discretization {
    /// Log-spaced radial grid on `[r_min, r_out]` with `r_out` a node.
    pub fn radial1d(dim: usize, r_min: f64, r_out: f64, h: f64) -> Result<Self> {
        if dim < 3 {
            return Err(Error::DimensionTooSmall(dim));
        }
        if !(r_min > 0.0 && r_out > r_min && h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "need 0 < r_min < r_out and h > 0, got r_min = {r_min}, r_out = {r_out}, h = {h}"
            )));
        }
        let len = ((r_out / r_min).ln() / h).ceil() as usize;
        if len < 4 {
            return Err(Error::GridTooCoarse(len));
        }
        let s0 = r_out.ln() - len as f64 * h;
        let nodes: Vec<[f64; 3]> = (0..len).map(|k| [(s0 + k as f64 * h).exp(), 0.0, 0.0]).collect();
        let rho: Vec<f64> = nodes.iter().map(|x| x[0]).collect();
        let quadrature = rho.iter().map(|r| r.powi(dim as i32) * h).collect();
        Ok(Self {
            geometry: Geometry::Radial1d { s0, h, len },
            dim,
            nodes,
            rho,
            quadrature,
            free: vec![0],
            rows: (1..len).collect(),
            owner: vec![0; len],
        })
    }

    /// Uniform `n³` grid on the box of `spec`; every singular point must sit on a node.
    pub fn box3d(spec: &SingularSpec, n: usize) -> Result<Self> {
        let (lo, hi) = match &spec.domain {
            Domain::Box { lo, hi } if lo.len() == 3 => (lo.clone(), hi.clone()),
            _ => return Err(Error::IncompatibleDomain("box3d needs a three-dimensional box".into())),
        };
        if n < 5 {
            return Err(Error::GridTooCoarse(n));
        }
        let h = (hi[0] - lo[0]) / (n - 1) as f64;
        for k in 1..3 {
            if ((hi[k] - lo[k]) / (n - 1) as f64 - h).abs() > 1e-12 * h {
                return Err(Error::IncompatibleDomain("box3d needs a cube".into()));
            }
        }
        let mut singular = Vec::new();
        for (i, x) in spec.points.iter().enumerate() {
            let idx: Vec<f64> = (0..3).map(|k| (x[k] - lo[k]) / h).collect();
            if idx.iter().any(|t| (t - t.round()).abs() > 1e-9) {
                return Err(Error::IncompatibleDomain(format!("point {i} is not a grid node")));
            }
            singular.push([0, 1, 2].map(|k| idx[k].round() as usize));
        }
        let weight = spec.weight()?;
        let mut nodes = Vec::new();
        let mut rho = Vec::new();
        let mut free = Vec::new();
        let mut rows = Vec::new();
        let mut owner = Vec::new();
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                for k in 1..n - 1 {
                    let x = [lo[0] + i as f64 * h, lo[1] + j as f64 * h, lo[2] + k as f64 * h];
                    let u = nodes.len();
                    if singular.contains(&[i, j, k]) {
                        free.push(u);
                    } else {
                        rows.push(u);
                    }
                    rho.push(weight.eval(&x).max(0.5 * h));
                    owner.push(spec.nearest(&x).0);
                    nodes.push(x);
                }
            }
        }
        Ok(Self {
            geometry: Geometry::Box3d { n, lo: [lo[0], lo[1], lo[2]], h },
            dim: 3,
            quadrature: vec![h * h * h; nodes.len()],
            nodes,
            rho,
            free,
            rows,
            owner,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.nodes.len()
    }

    /// Distance of each unknown to its singular point, floored like `ρ`.
    pub fn radius(&self, spec: &SingularSpec) -> Vec<f64> {
        match self.geometry {
            Geometry::Radial1d { .. } => self.nodes.iter().map(|x| x[0]).collect(),
            Geometry::Box3d { h, .. } => self
                .nodes
                .iter()
                .zip(&self.owner)
                .map(|(x, i)| {
                    let c = &spec.points[*i];
                    ((0..3).map(|k| (x[k] - c[k]).powi(2)).sum::<f64>()).sqrt().max(0.5 * h)
                })
                .collect(),
        }
    }

    /// Discrete Laplacian with zero Dirichlet data, one row per equation.
    pub fn laplacian(&self) -> CsrMatrix {
        let nunk = self.unknowns();
        match self.geometry {
            Geometry::Radial1d { s0, h, len } => {
                let n = self.dim as f64;
                let rows = self
                    .rows
                    .iter()
                    .map(|&k| {
                        let r = (s0 + k as f64 * h).exp();
                        let scale = 1.0 / (r.powf(n) * h * h);
                        let cp = (s0 + (k as f64 + 0.5) * h).exp().powf(n - 2.0) * scale;
                        let cm = (s0 + (k as f64 - 0.5) * h).exp().powf(n - 2.0) * scale;
                        let mut row = vec![(k - 1, cm), (k, -(cp + cm))];
                        if k + 1 < len {
                            row.push((k + 1, cp));
                        }
                        row
                    })
                    .collect();
                CsrMatrix::from_rows(nunk, rows)
            }
            Geometry::Box3d { n, h, .. } => {
                let m = n - 2;
                let id = |i: usize, j: usize, k: usize| (i * m + j) * m + k;
                let c = 1.0 / (h * h);
                let rows = self
                    .rows
                    .iter()
                    .map(|&u| {
                        let (i, j, k) = (u / (m * m), (u / m) % m, u % m);
                        let mut row = vec![(u, -6.0 * c)];
                        if i > 0 {
                            row.push((id(i - 1, j, k), c));
                        }
                        if i + 1 < m {
                            row.push((id(i + 1, j, k), c));
                        }
                        if j > 0 {
                            row.push((id(i, j - 1, k), c));
                        }
                        if j + 1 < m {
                            row.push((id(i, j + 1, k), c));
                        }
                        if k > 0 {
                            row.push((id(i, j, k - 1), c));
                        }
                        if k + 1 < m {
                            row.push((id(i, j, k + 1), c));
                        }
                        row
                    })
                    .collect();
                CsrMatrix::from_rows(nunk, rows)
            }
        }
    }

    /// Checks that `spec` lives on this grid and that `ū` vanishes on the boundary.
    pub fn check_compatible(&self, spec: &SingularSpec) -> Result<()> {
        spec.validate()?;
        if spec.domain.dim() != self.dim {
            return Err(Error::IncompatibleDomain(format!(
                "spec is {}-dimensional, grid is {}-dimensional",
                spec.domain.dim(),
                self.dim
            )));
        }
        match (&self.geometry, &spec.domain) {
            (Geometry::Radial1d { s0, h, len }, Domain::Ball { center, radius }) => {
                let r_out = (s0 + *len as f64 * h).exp();
                if spec.k() != 1 || spec.points[0] != *center {
                    return Err(Error::IncompatibleDomain(
                        "radial1d needs a single point at the ball center".into(),
                    ));
                }
                if (r_out - radius).abs() > 1e-9 * radius {
                    return Err(Error::IncompatibleDomain(format!(
                        "grid ends at {r_out}, ball radius is {radius}"
                    )));
                }
                let r_min = s0.exp();
                if r_min > 1e-3 * spec.epsilons[0] * (1.0 + 1e-12) {
                    return Err(Error::IncompatibleDomain(format!(
                        "r_min = {r_min} must not exceed 1e-3 epsilon = {}",
                        1e-3 * spec.epsilons[0]
                    )));
                }
                Ok(())
            }
            (Geometry::Box3d { .. }, Domain::Box { .. }) => Ok(()),
            _ => Err(Error::IncompatibleDomain("grid mode does not match the domain of the singular set".into())),
        }
    }

    /// `ū` at the unknowns; singular nodes use the value at half a cell.
    pub fn sample_ubar(&self, spec: &SingularSpec, profile: &RadialProfile) -> Result<Vec<f64>> {
        let g = Glued::new(spec, profile)?;
        let r = self.radius(spec);
        Ok(r.iter().zip(&self.owner).map(|(r, i)| g.radial_value(*i, *r)).collect())
    }

    /// `Δ_h ū + ū^p` at the equation rows.
    pub fn discrete_residual(&self, lap: &CsrMatrix, u: &[f64], p: f64) -> Vec<f64> {
        let lu = lap.matvec(u);
        self.rows.iter().zip(lu).map(|(&k, l)| l + u[k].abs().powf(p)).collect()
    }
}

/// The assembled linearization together with its weights.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    /// Discrete Laplacian, rows × unknowns.
    pub laplacian: CsrMatrix,
    /// `Δ_h + p ū^(p-1)`, rows × unknowns.
    pub matrix: CsrMatrix,
    pub matrix_t: CsrMatrix,
    /// `ū` at the unknowns.
    pub ubar: Vec<f64>,
    /// `D` at the unknowns.
    pub d: Vec<f64>,
    pub weights: WeightSelection,
    pub p: f64,
    /// `ρ^(2-ν)` at each equation row, the weight of the residual norm.
    pub row_weight: Vec<f64>,
    /// Unknown index of each equation row.
    pub rows: Vec<usize>,
    /// Unknowns without an equation.
    pub free: Vec<usize>,
}

/// Assembles the linearization about `ū` for `spec`.
pub fn assemble(
    disc: &Discretization,
    spec: &SingularSpec,
    profile: &RadialProfile,
    weights: &WeightSelection,
) -> Result<LinearOperator> {
    disc.check_compatible(spec)?;
    let ubar = disc.sample_ubar(spec, profile)?;
    assemble_about(disc, ubar, profile.constants.p(), weights)
}

/// Assembles `Δ_h + p u^(p-1)` about given samples `u`.
pub fn assemble_about(
    disc: &Discretization,
    ubar: Vec<f64>,
    p: f64,
    weights: &WeightSelection,
) -> Result<LinearOperator> {
    if ubar.len() != disc.unknowns() {
        return Err(Error::InvalidInput("ū must have one value per unknown".into()));
    }
    let laplacian = disc.laplacian();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(disc.rows.len());
    for (a, &k) in disc.rows.iter().enumerate() {
        let pot = p * ubar[k].abs().powf(p - 1.0);
        rows.push(laplacian.row(a).map(|(c, v)| if c == k { (c, v + pot) } else { (c, v) }).collect());
    }
    let matrix = CsrMatrix::from_rows(disc.unknowns(), rows);
    let matrix_t = matrix.transpose();
    let d = disc
        .rho
        .iter()
        .zip(&disc.quadrature)
        .map(|(r, q)| r.powf(-2.0 * weights.delta_nu) / q)
        .collect();
    let row_weight = disc.rows.iter().map(|k| disc.rho[*k].powf(2.0 - weights.nu)).collect();
    Ok(LinearOperator {
        laplacian,
        matrix,
        matrix_t,
        ubar,
        d,
        weights: *weights,
        p,
        row_weight,
        rows: disc.rows.clone(),
        free: disc.free.clone(),
    })
}

impl LinearOperator {
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.matrix.matvec(w)
    }

    /// `max ρ^(2-ν)|f|` over the equation rows.
    pub fn row_norm(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.row_weight).map(|(a, w)| a.abs() * w).fold(0.0, f64::max)
    }

    /// `L D Lᵀ z`.
    pub fn apply_normal(&self, z: &[f64]) -> Vec<f64> {
        let mut y = self.matrix_t.matvec(z);
        y.iter_mut().zip(&self.d).for_each(|(a, d)| *a *= d);
        self.matrix.matvec(&y)
    }

    /// `D Lᵀ z`.
    pub fn adjoint(&self, z: &[f64]) -> Vec<f64> {
        let mut y = self.matrix_t.matvec(z);
        y.iter_mut().zip(&self.d).for_each(|(a, d)| *a *= d);
        y
    }

    /// Writes `row col value` lines, one per stored entry.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.matrix.nrows {
            for (c, v) in self.matrix.row(i) {
                writeln!(out, "{i} {c} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// How to solve the normal system `L D Lᵀ z = f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SolveMethod {
    /// Banded LQ factorization of `S L D^(1/2)`, `S` a row scaling.
    Direct,
    /// Jacobi-preconditioned conjugate gradients on `L D Lᵀ`.
    Cg { tol: f64, max_iter: usize },
    /// Conjugate gradients on the square block of `L` over the equation
    /// unknowns, followed by a minimum-norm correction along the free
    /// unknowns. Same result as the other methods; needs the square block
    /// to be negative definite.
    Deflated { tol: f64, max_iter: usize },
}

impl SolveMethod {
    pub fn default_for(disc: &Discretization) -> Self {
        match disc.geometry {
            Geometry::Radial1d { .. } => SolveMethod::Direct,
            Geometry::Box3d { .. } => SolveMethod::Deflated { tol: 1e-10, max_iter: 20_000 },
        }
    }
}

/// Statistics of one right-inverse application.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// `‖L w - f‖ / ‖f‖` in the weighted sup norm at exponent `ν - 2`.
    pub relative_residual: f64,
}

/// Reusable right inverse of one operator.
#[derive(Debug, Clone)]
pub struct RightInverse<'a> {
    op: &'a LinearOperator,
    method: SolveMethod,
    band: Option<(BandLq, Vec<f64>, Vec<f64>)>,
    deflation: Option<Deflation>,
    inv_diag: Vec<f64>,
}

/// Precomputed pieces of the deflated route.
#[derive(Debug, Clone)]
struct Deflation {
    /// `-L` restricted to the equation unknowns.
    neg_square: CsrMatrix,
    inv_diag: Vec<f64>,
    /// Position of each unknown among the equation unknowns.
    slot: Vec<Option<usize>>,
    /// `B e_j = L_sq⁻¹ L e_j` for each free unknown `j`.
    columns: Vec<Vec<f64>>,
    /// Cholesky factor of `Bᵀ D⁻¹ B + D_free⁻¹`.
    gram: crate::linalg::BandCholesky,
    tol: f64,
    max_iter: usize,
}

impl Deflation {
    fn new(op: &LinearOperator, tol: f64, max_iter: usize) -> Result<Self> {
        let m = &op.matrix;
        let mut slot = vec![None; m.ncols];
        for (a, &k) in op.rows.iter().enumerate() {
            slot[k] = Some(a);
        }
        let rows: Vec<Vec<(usize, f64)>> = (0..m.nrows)
            .map(|a| m.row(a).filter_map(|(c, v)| slot[c].map(|b| (b, -v))).collect())
            .collect();
        let neg_square = CsrMatrix::from_rows(m.nrows, rows);
        let mut inv_diag = vec![0.0; m.nrows];
        for a in 0..m.nrows {
            let d = neg_square.row(a).find(|e| e.0 == a).map(|e| e.1).unwrap_or(0.0);
            if !(d > 0.0) {
                return Err(Error::SingularSystem(a));
            }
            inv_diag[a] = 1.0 / d;
        }
        let mut me = Self {
            neg_square,
            inv_diag,
            slot,
            columns: Vec::new(),
            gram: crate::linalg::BandCholesky::factor(0, 0, |_, _| 0.0)?,
            tol,
            max_iter,
        };
        for &j in &op.free {
            let mut e = vec![0.0; m.ncols];
            e[j] = 1.0;
            let (col, _) = me.square_solve(&op.apply(&e))?;
            me.columns.push(col);
        }
        let k = op.free.len();
        let dinv: Vec<f64> = op.rows.iter().map(|r| 1.0 / op.d[*r]).collect();
        let columns = &me.columns;
        let gram = crate::linalg::BandCholesky::factor(k, k.saturating_sub(1), |i, j| {
            let s: f64 = (0..dinv.len()).map(|a| columns[i][a] * dinv[a] * columns[j][a]).sum();
            if i == j {
                s + 1.0 / op.d[op.free[i]]
            } else {
                s
            }
        })?;
        me.gram = gram;
        Ok(me)
    }

    /// Solves `L_sq x = g` on the equation unknowns.
    fn square_solve(&self, g: &[f64]) -> Result<(Vec<f64>, usize)> {
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let res = conjugate_gradient(|x| self.neg_square.matvec(x), &self.inv_diag, &neg, self.tol, self.max_iter)?;
        Ok((res.x, res.iterations))
    }

    fn solve(&self, op: &LinearOperator, f: &[f64]) -> Result<(Vec<f64>, usize)> {
        let (a, its) = self.square_solve(f)?;
        let rhs: Vec<f64> = self
            .columns
            .iter()
            .map(|b| b.iter().zip(&a).zip(&op.rows).map(|((x, y), r)| x * y / op.d[*r]).sum())
            .collect();
        let c = self.gram.solve(&rhs);
        let mut w = vec![0.0; op.matrix.ncols];
        for (k, slot) in self.slot.iter().enumerate() {
            if let Some(s) = slot {
                w[k] = a[*s] - self.columns.iter().zip(&c).map(|(b, cj)| b[*s] * cj).sum::<f64>();
            }
        }
        for (j, cj) in op.free.iter().zip(&c) {
            w[*j] = *cj;
        }
        Ok((w, its))
    }
}

fn sparse_weighted_dot(m: &CsrMatrix, a: usize, b: usize, d: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut rb = m.row(b).peekable();
    for (c, v) in m.row(a) {
        while let Some(&(cb, _)) = rb.peek() {
            if cb < c {
                rb.next();
            } else {
                break;
            }
        }
        if let Some(&(cb, vb)) = rb.peek() {
            if cb == c {
                s += v * d[c] * vb;
            }
        }
    }
    s
}

impl<'a> RightInverse<'a> {
    pub fn new(op: &'a LinearOperator, method: SolveMethod) -> Result<Self> {
        let m = &op.matrix;
        let diag: Vec<f64> = (0..m.nrows).map(|a| sparse_weighted_dot(m, a, a, &op.d)).collect();
        if let Some(a) = diag.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::SingularSystem(a));
        }
        let band = match method {
            SolveMethod::Direct => {
                let first = m.row(0).map(|e| e.0).min().unwrap_or(0);
                let half: Vec<f64> = op.d.iter().map(|d| d.sqrt()).collect();
                let scale: Vec<f64> = diag.iter().map(|v| 1.0 / v.sqrt()).collect();
                let rows: Vec<Vec<(usize, f64)>> = (0..m.nrows)
                    .map(|a| m.row(a).map(|(c, v)| (c - first, scale[a] * v * half[c])).collect())
                    .collect();
                if first > 0 || m.ncols != m.nrows + 1 {
                    return Err(Error::InvalidInput("direct solve needs a radial grid".into()));
                }
                Some((BandLq::factor(m.ncols, 2, &rows)?, scale, half))
            }
            _ => None,
        };
        let deflation = match method {
            SolveMethod::Deflated { tol, max_iter } => Some(Deflation::new(op, tol, max_iter)?),
            _ => None,
        };
        Ok(Self { op, method, band, deflation, inv_diag: diag.iter().map(|v| 1.0 / v).collect() })
    }

    pub fn op(&self) -> &LinearOperator {
        self.op
    }

    /// `w = D Lᵀ z` with `L D Lᵀ z = f`.
    pub fn solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_with_stats(f)?.0)
    }

    pub fn solve_with_stats(&self, f: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        if f.len() != self.op.matrix.nrows {
            return Err(Error::InvalidInput("right-hand side must have one value per equation".into()));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("right-hand side is not finite".into()));
        }
        let (w, iterations) = match (&self.method, &self.band) {
            (SolveMethod::Direct, Some((lq, scale, half))) => {
                let g: Vec<f64> = f.iter().zip(scale).map(|(a, s)| a * s).collect();
                let mut w = lq.solve_min_norm(&g);
                w.iter_mut().zip(half).for_each(|(a, h)| *a *= h);
                // One refinement step on the residual.
                let r: Vec<f64> = f.iter().zip(self.op.apply(&w)).map(|(a, b)| a - b).collect();
                let g: Vec<f64> = r.iter().zip(scale).map(|(a, s)| a * s).collect();
                let dw = lq.solve_min_norm(&g);
                w.iter_mut().zip(dw.iter().zip(half)).for_each(|(a, (d, h))| *a += d * h);
                (w, 0)
            }
            (SolveMethod::Cg { tol, max_iter }, _) => {
                let res = conjugate_gradient(|z| self.op.apply_normal(z), &self.inv_diag, f, *tol, *max_iter)?;
                (self.op.adjoint(&res.x), res.iterations)
            }
            (SolveMethod::Deflated { .. }, _) => {
                let defl = self.deflation.as_ref().expect("deflated method carries its data");
                defl.solve(self.op, f)?
            }
            _ => unreachable!("direct method always carries a factorization"),
        };
        let r: Vec<f64> = self.op.apply(&w).iter().zip(f).map(|(a, b)| a - b).collect();
        let fnorm = self.op.row_norm(f);
        let err = self.op.row_norm(&r);
        let relative_residual = if fnorm > 0.0 { err / fnorm } else { err };
        Ok((w, SolveStats { iterations, relative_residual }))
    }
}

/// One-shot right inverse with the default method for the grid.
pub fn right_inverse_adjoint_range(
    disc: &Discretization,
    op: &LinearOperator,
    f: &[f64],
) -> Result<Vec<f64>> {
    RightInverse::new(op, SolveMethod::default_for(disc))?.solve(f)
}

/// Weighted operator norm `max_i Σ_j ρ_i^(-ν) |G_ij| ρ_j^(ν-2)` of the right inverse.
///
/// Needs one solve per equation, so it is limited to moderate grids.
pub fn g_norm(disc: &Discretization, rinv: &RightInverse, nu: f64) -> Result<f64> {
    let rows = disc.rows.len();
    if rows > 20_000 {
        return Err(Error::InvalidInput(format!("{rows} columns is too many for an explicit G")));
    }
    let mut acc = vec![0.0; disc.unknowns()];
    let mut e = vec![0.0; rows];
    for j in 0..rows {
        e[j] = 1.0;
        let col = rinv.solve(&e)?;
        e[j] = 0.0;
        let wj = disc.rho[disc.rows[j]].powf(nu - 2.0);
        for (i, g) in col.iter().enumerate() {
            acc[i] += g.abs() * wj;
        }
    }
    Ok(acc.iter().zip(&disc.rho).map(|(a, r)| a * r.powf(-nu)).fold(0.0, f64::max))
}

/// `(N-2)² - 4 p α^(p-1) K`; positive when the maximum principle argument applies.
pub fn max_principle_margin(alpha: f64, k: usize, constants: &DerivedConstants) -> Result<f64> {
    if !(alpha > 0.0) || k == 0 {
        return Err(Error::InvalidInput(format!("need alpha > 0 and K >= 1, got {alpha}, {k}")));
    }
    let n = constants.n();
    let p = constants.p();
    Ok((n - 2.0).powi(2) - 4.0 * p * alpha.powf(p - 1.0) * k as f64)
}

/// Result of a successful barrier check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierCertificate {
    pub gamma: f64,
    /// Largest `c` with `L ρ^γ ≤ -c ρ^(γ-2)` on the checked nodes.
    pub c: f64,
    pub nodes_checked: usize,
}

/// Verifies that `ρ^γ` is a strict supersolution on `ε_i ≤ ρ ≤ σ`.
pub fn barrier_check(
    disc: &Discretization,
    op: &LinearOperator,
    spec: &SingularSpec,
    sigma: f64,
    gamma: f64,
) -> Result<BarrierCertificate> {
    let n = disc.dim as f64;
    if !(gamma > 2.0 - n && gamma < 0.0) {
        return Err(Error::InvalidInput(format!("gamma = {gamma} must lie in (2 - N, 0)")));
    }
    let w: Vec<f64> = disc.rho.iter().map(|r| r.powf(gamma)).collect();
    let lw = op.apply(&w);
    let mut c = f64::INFINITY;
    let mut checked = 0;
    for (a, &k) in disc.rows.iter().enumerate() {
        let rho = disc.rho[k];
        if rho < spec.epsilons[disc.owner[k]] || rho > sigma {
            continue;
        }
        checked += 1;
        let ratio = -lw[a] / rho.powf(gamma - 2.0);
        if !(ratio > 0.0) {
            return Err(Error::BarrierFailure { node: k, value: lw[a] });
        }
        c = c.min(ratio);
    }
    if checked == 0 {
        return Err(Error::InvalidInput("no nodes in the barrier annulus".into()));
    }
    Ok(BarrierCertificate { gamma, c, nodes_checked: checked })
}

/// Dilation mode `a u_ε + r u_ε'` around each node's singular point.
pub fn dilation_mode(disc: &Discretization, spec: &SingularSpec, profile: &RadialProfile) -> Vec<f64> {
    let a = profile.constants.a;
    disc.radius(spec)
        .iter()
        .zip(&disc.owner)
        .map(|(r, i)| {
            let e = spec.epsilons[*i];
            a * profile.u_of_r(e, *r) + r * profile.du_dr(e, *r)
        })
        .collect()
}

/// Basis of the kernel of `L`: `e_j - G L e_j` for each free unknown `j`.
pub fn kernel_basis(disc: &Discretization, rinv: &RightInverse) -> Result<Vec<Vec<f64>>> {
    let op = rinv.op();
    disc.free
        .iter()
        .map(|&j| {
            let mut e = vec![0.0; disc.unknowns()];
            e[j] = 1.0;
            let le = op.apply(&e);
            let g = rinv.solve(&le)?;
            e.iter_mut().zip(g).for_each(|(a, b)| *a -= b);
            Ok(e)
        })
        .collect()
}

/// Cosine between `mode` and the kernel of `L` under `Σ ρ^(-2ν) a b`.
pub fn kernel_correlation(
    disc: &Discretization,
    rinv: &RightInverse,
    mode: &[f64],
    nu: f64,
) -> Result<f64> {
    let wt: Vec<f64> = disc.rho.iter().map(|r| r.powf(-2.0 * nu)).collect();
    let ip = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&wt).map(|((x, y), w)| x * y * w).sum::<f64>();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut k in kernel_basis(disc, rinv)? {
        for b in &basis {
            let c = ip(&k, b);
            k.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let nk = ip(&k, &k).sqrt();
        if nk > 0.0 {
            k.iter_mut().for_each(|x| *x /= nk);
            basis.push(k);
        }
    }
    let nm = ip(mode, mode).sqrt();
    if nm == 0.0 {
        return Err(Error::InvalidInput("mode vanishes".into()));
    }
    let proj: f64 = basis.iter().map(|b| ip(mode, b).powi(2)).sum();
    Ok(proj.sqrt() / nm)
}
