//! Contraction iteration `v ↦ -G(f + Q(v))` for `u = ū + v`.
//!
//! `f = Δ_h ū + ū^p` is the discrete residual of the glued approximation and
//! `Q(v) = |ū + v|^p - ū^p - p ū^(p-1) v`. A fixed point solves the discrete
//! equation `Δ_h u + |u|^p = 0` at every equation node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glue::{sandwich_constants, SingularSpec};
use crate::linear_solve::{
    assemble, g_norm, Discretization, Geometry, LinearOperator, RightInverse, SolveMethod,
};
use crate::params::{ball_exponent, SingularKind, WeightSelection};
use crate::radial_profile::RadialProfile;

/// `|ū + v|^p - ū^p - p ū^(p-1) v` pointwise.
pub fn q_nonlinearity(ubar: &[f64], v: &[f64], p: f64) -> Vec<f64> {
    ubar.iter()
        .zip(v)
        .map(|(u, w)| {
            let u = u.abs();
            (u + w).abs().powf(p) - u.powf(p) - p * u.powf(p - 1.0) * w
        })
        .collect()
}

/// How the ball radius coefficient `β` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaChoice {
    /// `β = 2 ‖G f‖_ν / ε^q`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    /// Stop once the weighted step norm drops below this.
    pub stop_tol: f64,
    pub max_iter: usize,
    pub beta: BetaChoice,
    /// Solver for the right inverse; `None` picks the grid default.
    pub method: Option<SolveMethod>,
    /// Replace `f` by zero (test hook).
    pub zero_residual: bool,
    /// Also compute the weighted norm of `G` (radial grids only).
    pub report_g_norm: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            stop_tol: 1e-10,
            max_iter: 50,
            beta: BetaChoice::Auto,
            method: None,
            zero_residual: false,
            report_g_norm: true,
        }
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖v_k‖_ν`.
    pub v_norm: f64,
    /// `‖v_k - v_{k-1}‖_ν`.
    pub step_norm: f64,
    /// `step_k / step_{k-1}`, from the second iteration on.
    pub ratio: Option<f64>,
    /// `‖Δ_h u_k + |u_k|^p‖_{ν-2}`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub beta: f64,
    pub q: f64,
    /// `β ε^q`.
    pub ball_radius: f64,
    pub converged: bool,
}

impl IterationTrace {
    /// Largest ratio recorded at or after `from`.
    pub fn max_ratio_from(&self, from: usize) -> f64 {
        self.records
            .iter()
            .filter(|r| r.iteration >= from)
            .filter_map(|r| r.ratio)
            .fold(0.0, f64::max)
    }
}

/// Final fields, in unknown order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolutionField {
    /// Distance of each unknown to its singular point.
    pub radius: Vec<f64>,
    pub owner: Vec<usize>,
    pub ubar: Vec<f64>,
    pub v: Vec<f64>,
}

impl SolutionField {
    pub fn u(&self) -> Vec<f64> {
        self.ubar.iter().zip(&self.v).map(|(a, b)| a + b).collect()
    }
}

/// `u/ū` at one of the innermost nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub radius: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub converged: bool,
    pub iterations: usize,
    pub epsilon: f64,
    pub weights: WeightSelection,
    pub beta: f64,
    pub q: f64,
    pub ball_radius: f64,
    /// `‖v‖_ν`.
    pub v_norm: f64,
    /// `‖Δ_h u + |u|^p‖_{ν-2}`.
    pub residual_norm: f64,
    /// `min u/ū` over nodes with `ū > 0`.
    pub positivity_margin: f64,
    /// `min u` over all nodes.
    pub min_u: f64,
    /// `u/ū` on the innermost decade of radii.
    pub ratio_table: Vec<RatioEntry>,
    /// `max |ρ^(2/(p-1)) u - v₁(-log(ρ/ε))|` on the innermost decade.
    pub asymptote_deviation: f64,
    /// Weighted norm of `G`, when computed.
    pub g_norm: Option<f64>,
    #[serde(skip)]
    pub field: SolutionField,
}

/// Weighted sup `max ρ^(-ν)|v|` over all unknowns.
pub fn v_norm(disc: &Discretization, v: &[f64], nu: f64) -> f64 {
    disc.rho.iter().zip(v).map(|(r, x)| r.powf(-nu) * x.abs()).fold(0.0, f64::max)
}

fn residual_of(disc: &Discretization, op: &LinearOperator, v: &[f64]) -> f64 {
    let u: Vec<f64> = op.ubar.iter().zip(v).map(|(a, b)| a + b).collect();
    op.row_norm(&disc.discrete_residual(&op.laplacian, &u, op.p))
}

/// Runs the iteration; on failure the partial trace is returned with the error.
pub fn picard_iterate(
    disc: &Discretization,
    op: &LinearOperator,
    epsilon: f64,
    q: f64,
    opts: &PicardOptions,
) -> (IterationTrace, Result<(Vec<f64>, Option<f64>)>) {
    let nu = op.weights.nu;
    let mut trace = IterationTrace { records: Vec::new(), beta: 0.0, q, ball_radius: 0.0, converged: false };
    let method = opts.method.unwrap_or_else(|| SolveMethod::default_for(disc));
    let rinv = match RightInverse::new(op, method) {
        Ok(r) => r,
        Err(e) => return (trace, Err(e)),
    };
    let g = if opts.report_g_norm && matches!(disc.geometry, Geometry::Radial1d { .. }) {
        match g_norm(disc, &rinv, nu) {
            Ok(g) => Some(g),
            Err(e) => return (trace, Err(e)),
        }
    } else {
        None
    };
    let f: Vec<f64> = if opts.zero_residual {
        vec![0.0; disc.rows.len()]
    } else {
        disc.discrete_residual(&op.laplacian, &op.ubar, op.p)
    };
    let mut v = vec![0.0; disc.unknowns()];
    let mut prev_step: Option<f64> = None;
    let mut above_one = 0;
    for k in 1..=opts.max_iter {
        let qv = q_nonlinearity(&op.ubar, &v, op.p);
        let rhs: Vec<f64> = disc.rows.iter().zip(&f).map(|(r, fi)| -(fi + qv[*r])).collect();
        let next = match rinv.solve(&rhs) {
            Ok(x) => x,
            Err(e) => return (trace, Err(e)),
        };
        let diff: Vec<f64> = next.iter().zip(&v).map(|(a, b)| a - b).collect();
        let step = v_norm(disc, &diff, nu);
        let norm = v_norm(disc, &next, nu);
        v = next;
        if k == 1 {
            trace.beta = match opts.beta {
                BetaChoice::Auto => 2.0 * norm / epsilon.powf(q),
                BetaChoice::Fixed(b) => b,
            };
            trace.ball_radius = trace.beta * epsilon.powf(q);
        }
        let ratio = prev_step.map(|p| if p > 0.0 { step / p } else { 0.0 });
        trace.records.push(IterationRecord {
            iteration: k,
            v_norm: norm,
            step_norm: step,
            ratio,
            residual: residual_of(disc, op, &v),
        });
        if !norm.is_finite() {
            return (trace, Err(Error::Diverged { iteration: k }));
        }
        if norm > trace.ball_radius * (1.0 + 1e-12) && !(opts.zero_residual && norm == 0.0) {
            let radius = trace.ball_radius;
            return (trace, Err(Error::LeftBall { iteration: k, norm, radius }));
        }
        if let Some(r) = ratio {
            above_one = if r >= 1.0 { above_one + 1 } else { 0 };
            if above_one >= 3 {
                return (trace, Err(Error::Diverged { iteration: k }));
            }
        }
        if step < opts.stop_tol {
            if op.ubar.iter().zip(&v).any(|(a, b)| a + b < 0.0 || (*a > 0.0 && !(a + b > 0.0))) {
                return (trace, Err(Error::PositivityLost { iteration: k }));
            }
            trace.converged = true;
            return (trace, Ok((v, g)));
        }
        prev_step = Some(step);
    }
    (trace, Err(Error::MaxIterations(opts.max_iter)))
}

/// Solves `Δu + u^p = 0` near `ū` and reports the diagnostics.
pub fn picard_solve(
    spec: &SingularSpec,
    profile: &RadialProfile,
    weights: &WeightSelection,
    disc: &Discretization,
    opts: &PicardOptions,
) -> Result<(SolutionReport, IterationTrace)> {
    let (trace, report) = picard_solve_traced(spec, profile, weights, disc, opts);
    Ok((report?, trace))
}

/// Like [`picard_solve`], but keeps the partial trace when the run fails.
pub fn picard_solve_traced(
    spec: &SingularSpec,
    profile: &RadialProfile,
    weights: &WeightSelection,
    disc: &Discretization,
    opts: &PicardOptions,
) -> (IterationTrace, Result<SolutionReport>) {
    let q = ball_exponent(&profile.constants, weights.nu, SingularKind::Isolated);
    let op = match assemble(disc, spec, profile, weights) {
        Ok(op) => op,
        Err(e) => {
            let trace = IterationTrace { records: Vec::new(), beta: 0.0, q, ball_radius: 0.0, converged: false };
            return (trace, Err(e));
        }
    };
    let (trace, out) = picard_iterate(disc, &op, spec.max_epsilon(), q, opts);
    let report = out.map(|(v, g)| build_report(disc, spec, profile, &op, &trace, v, g));
    (trace, report)
}

/// Nodes on the innermost decade of radii around any point.
fn innermost(radius: &[f64]) -> Vec<usize> {
    let r0 = radius.iter().cloned().fold(f64::INFINITY, f64::min);
    (0..radius.len()).filter(|&k| radius[k] <= 10.0 * r0 * (1.0 + 1e-12)).collect()
}

fn build_report(
    disc: &Discretization,
    spec: &SingularSpec,
    profile: &RadialProfile,
    op: &LinearOperator,
    trace: &IterationTrace,
    v: Vec<f64>,
    g: Option<f64>,
) -> SolutionReport {
    let field = SolutionField { radius: disc.radius(spec), owner: disc.owner.clone(), ubar: op.ubar.clone(), v };
    let u = field.u();
    let positivity_margin = field
        .ubar
        .iter()
        .zip(&u)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| b / a)
        .fold(f64::INFINITY, f64::min);
    let min_u = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let a = profile.constants.a;
    let inner = innermost(&field.radius);
    let ratio_table = inner
        .iter()
        .map(|&k| RatioEntry { radius: field.radius[k], ratio: u[k] / field.ubar[k] })
        .collect();
    let asymptote_deviation = inner
        .iter()
        .map(|&k| {
            let r = field.radius[k];
            let e = spec.epsilons[field.owner[k]];
            (r.powf(a) * u[k] - profile.eval(-(r / e).ln()).0).abs()
        })
        .fold(0.0, f64::max);
    let last = trace.records.last();
    SolutionReport {
        converged: trace.converged,
        iterations: trace.records.len(),
        epsilon: spec.max_epsilon(),
        weights: op.weights,
        beta: trace.beta,
        q: trace.q,
        ball_radius: trace.ball_radius,
        v_norm: last.map(|r| r.v_norm).unwrap_or(0.0),
        residual_norm: last.map(|r| r.residual).unwrap_or(0.0),
        positivity_margin,
        min_u,
        ratio_table,
        asymptote_deviation,
        g_norm: g,
        field,
    }
}

/// Named tolerances used by [`verify_solution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyTolerances {
    pub residual: f64,
    /// Lower bound on `min u/ū`.
    pub positivity: f64,
    /// Relative slack on the sandwich bounds.
    pub sandwich_slack: f64,
    /// Allowed `|u/ū - 1|` on the innermost decade.
    pub asymptote: f64,
    /// Bound on the relative fourth-order consistency residual.
    pub consistency: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self { residual: 1e-6, positivity: 0.5, sandwich_slack: 0.05, asymptote: 0.02, consistency: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationLedger {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerificationLedger {
    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

fn check(name: &str, value: f64, threshold: f64, below: bool) -> Check {
    let passed = if below { value <= threshold } else { value >= threshold };
    Check { name: name.into(), value, threshold, passed: passed && value.is_finite() }
}

/// Fourth-order residual `Δu + u^p` relative to `u^p`, in the `ν - 2` weight.
///
/// Uses a wider stencil than the solver, so it exposes grids too coarse to
/// resolve the solution even when the discrete equation holds exactly.
pub fn consistency_residual(disc: &Discretization, u: &[f64], p: f64, nu: f64) -> f64 {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    let mut note = |k: usize, lap: f64| {
        let w = disc.rho[k].powf(2.0 - nu);
        num = num.max(w * (lap + u[k].abs().powf(p)).abs());
        den = den.max(w * u[k].abs().powf(p));
    };
    match disc.geometry {
        Geometry::Radial1d { h, len, .. } => {
            let n = disc.dim as f64;
            let val = |k: usize| if k < len { u[k] } else { 0.0 };
            for k in 2..len.saturating_sub(1) {
                let (m2, m1, z, p1, p2) = (val(k - 2), val(k - 1), val(k), val(k + 1), val(k + 2));
                let ws = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
                let wss = (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * h * h);
                let r = disc.rho[k];
                note(k, (wss + (n - 2.0) * ws) / (r * r));
            }
        }
        Geometry::Box3d { n, h, .. } => {
            let m = n - 2;
            let val = |i: i64, j: i64, k: i64| {
                if i < 0 || j < 0 || k < 0 || i >= m as i64 || j >= m as i64 || k >= m as i64 {
                    0.0
                } else {
                    u[((i as usize * m) + j as usize) * m + k as usize]
                }
            };
            let free: std::collections::HashSet<usize> = disc.free.iter().cloned().collect();
            let near_free = |i: i64, j: i64, k: i64| {
                disc.free.iter().any(|&f| {
                    let (fi, fj, fk) = ((f / (m * m)) as i64, ((f / m) % m) as i64, (f % m) as i64);
                    (fi - i).abs().max((fj - j).abs()).max((fk - k).abs()) <= 2
                })
            };
            for idx in 0..u.len() {
                if free.contains(&idx) {
                    continue;
                }
                let (i, j, k) = ((idx / (m * m)) as i64, ((idx / m) % m) as i64, (idx % m) as i64);
                if near_free(i, j, k) {
                    continue;
                }
                let z = val(i, j, k);
                let mut lap = 0.0;
                for d in [[1, 0, 0], [0, 1, 0], [0, 0, 1]] {
                    let at = |s: i64| val(i + s * d[0], j + s * d[1], k + s * d[2]);
                    lap += (-at(-2) + 16.0 * at(-1) - 30.0 * z + 16.0 * at(1) - at(2)) / (12.0 * h * h);
                }
                note(idx, lap);
            }
        }
    }
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Checks a converged report against the profile and the singular set.
pub fn verify_solution(
    report: &SolutionReport,
    disc: &Discretization,
    profile: &RadialProfile,
    spec: &SingularSpec,
    tol: &VerifyTolerances,
) -> Result<VerificationLedger> {
    let field = &report.field;
    if field.v.len() != disc.unknowns() || field.ubar.len() != disc.unknowns() {
        return Err(Error::InvalidInput("report field does not match the grid".into()));
    }
    let p = profile.constants.p();
    let a = profile.constants.a;
    let nu = report.weights.nu;
    let u = field.u();
    let mut checks = Vec::new();

    let norm = v_norm(disc, &field.v, nu);
    checks.push(check("ball", norm, report.ball_radius * (1.0 + 1e-9), true));

    let positivity = field
        .ubar
        .iter()
        .zip(&u)
        .filter(|(b, _)| **b > 0.0)
        .map(|(b, x)| x / b)
        .fold(f64::INFINITY, f64::min);
    let min_u = u.iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(check("positivity", positivity.min(if min_u > 0.0 { f64::INFINITY } else { min_u }), tol.positivity, false));

    let (c1, c2) = sandwich_constants(profile, spec.r_cut);
    let mut worst: f64 = 0.0;
    for k in 0..u.len() {
        let r = field.radius[k];
        if r > spec.r_cut * spec.epsilons[field.owner[k]] {
            continue;
        }
        let scaled = r.powf(a) * u[k];
        let excess = (c1 - scaled).max(scaled - c2).max(0.0) / c1;
        worst = worst.max(excess);
    }
    checks.push(check("sandwich", worst, tol.sandwich_slack, true));

    let lap = disc.laplacian();
    let res = disc.discrete_residual(&lap, &u, p);
    let rw: f64 = disc
        .rows
        .iter()
        .zip(&res)
        .map(|(k, x)| disc.rho[*k].powf(2.0 - nu) * x.abs())
        .fold(0.0, f64::max);
    checks.push(check("residual", rw, tol.residual, true));

    let inner = innermost(&field.radius);
    let dev = inner.iter().map(|&k| (u[k] / field.ubar[k] - 1.0).abs()).fold(0.0, f64::max);
    checks.push(check("asymptote", dev, tol.asymptote, true));

    checks.push(check("monotone_decay", monotone_violation(disc, spec, &u), 0.0, true));

    checks.push(check("consistency", consistency_residual(disc, &u, p, nu), tol.consistency, true));

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerificationLedger { checks, passed })
}

/// Largest relative increase of `u` when moving away from its singular point.
///
/// Radial grids are checked along the whole radius; box grids along the
/// axis rays from each point, up to half the point separation or the boundary.
fn monotone_violation(disc: &Discretization, spec: &SingularSpec, u: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    let mut walk = |seq: &[usize]| {
        for w in seq.windows(2) {
            let (a, b) = (u[w[0]], u[w[1]]);
            if b > a {
                worst = worst.max((b - a) / a.abs().max(1e-300));
            }
        }
    };
    match disc.geometry {
        Geometry::Radial1d { len, .. } => walk(&(0..len).collect::<Vec<_>>()),
        Geometry::Box3d { n, lo, h } => {
            let m = n - 2;
            let reach = spec.separation_radius();
            for x in &spec.points {
                let c = [0, 1, 2].map(|k| ((x[k] - lo[k]) / h).round() as i64 - 1);
                for axis in 0..3 {
                    for dir in [-1i64, 1] {
                        let mut seq = Vec::new();
                        let mut s = 0i64;
                        loop {
                            let mut idx = c;
                            idx[axis] += dir * s;
                            if idx[axis] < 0 || idx[axis] >= m as i64 || (s as f64) * h > reach {
                                break;
                            }
                            seq.push(((idx[0] as usize * m) + idx[1] as usize) * m + idx[2] as usize);
                            s += 1;
                        }
                        walk(&seq);
                    }
                }
            }
        }
    }
    worst
}
