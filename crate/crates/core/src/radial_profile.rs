//! The singular radial solutions `u_ε`.
//!
//! With `u(r) = r^(-a) v(t)`, `t = -log r` and `a = 2/(p-1)`, radial solutions
//! of `Δu + u^p = 0` become the autonomous equation
//!
//! ```text
//! v'' - (N - 2 - 2a) v' - v_inf^(p-1) v + v^p = 0.
//! ```
//!
//! The singular solution that is regular at infinity follows the unstable
//! manifold of the saddle `(0, 0)` into the focus or node `(v_inf, 0)`. It is
//! tabulated once on a uniform `t`-grid; every `u_ε` is a rescaling of it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{self, DenseStep, Options};
use crate::params::DerivedConstants;

/// Integration settings for [`compute_profile_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub tol: f64,
    /// Left end of the tabulated range; `None` picks `-20/mu_plus`.
    pub t_min: Option<f64>,
    /// Integration stops here if the plateau has not been reached.
    pub t_max: f64,
    /// Spacing of the output grid.
    pub spacing: f64,
    /// Offset along the unstable eigenvector at launch.
    pub delta: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { tol: 1e-10, t_min: None, t_max: 400.0, spacing: 0.01, delta: 1e-8 }
    }
}

/// Tabulated orbit `v₁(t)` and its derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub t_grid: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
    pub constants: DerivedConstants,
    /// `lim e^(-mu_plus t) v₁(t)` as `t → -∞`.
    pub far_coefficient: f64,
    /// Accumulated translation from [`normalize_profile`].
    pub shift: f64,
    pub tol: f64,
}

/// Right-hand side of the first-order system for `(v, v')`.
pub fn profile_rhs(c: &DerivedConstants, v: f64, vp: f64) -> f64 {
    c.drift() * vp + c.c_lin() * v - v.abs().powf(c.p() - 1.0) * v
}

/// Hamiltonian of the drift-free system; non-increasing along the orbit.
pub fn hamiltonian(c: &DerivedConstants, v: f64, vp: f64) -> f64 {
    let p = c.p();
    0.5 * vp * vp - 0.5 * c.c_lin() * v * v + v.abs().powf(p + 1.0) / (p + 1.0)
}

/// Integrates the orbit with the given tolerance over `t_span = (t_min, t_max)`.
pub fn compute_profile(
    constants: &DerivedConstants,
    tol: f64,
    t_span: (f64, f64),
) -> Result<RadialProfile> {
    compute_profile_with(
        constants,
        &ProfileOptions { tol, t_min: Some(t_span.0), t_max: t_span.1, ..Default::default() },
    )
}

/// Time from launch at `delta` until `v` first reaches `v_inf / 2`.
fn anchor_time(c: &DerivedConstants, opts: &ProfileOptions, delta: f64) -> Result<f64> {
    let target = 0.5 * c.v_inf;
    let mut hit = None;
    let rhs = |_t: f64, y: &[f64; 2]| [y[1], profile_rhs(c, y[0], y[1])];
    let iopts = Options { h_max: opts.spacing, ..Options::with_tol(opts.tol) };
    integrate::integrate(rhs, 0.0, [delta, delta * c.mu_plus], 1e4, iopts, |s| {
        if s.y1[0] >= target {
            hit = Some(bisect_crossing(s, target));
            false
        } else {
            true
        }
    })?;
    hit.ok_or_else(|| Error::NoConvergence("orbit never reached v_inf/2".into()))
}

fn bisect_crossing(s: &DenseStep<2>, target: f64) -> f64 {
    let (mut lo, mut hi) = (s.t0, s.t1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if s.eval(mid)[0] < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Integrates the orbit and tabulates it on a uniform grid.
///
/// The time origin is fixed by `v₁(0) = v_inf / 2`.
pub fn compute_profile_with(c: &DerivedConstants, opts: &ProfileOptions) -> Result<RadialProfile> {
    if !(opts.tol > 1e-13 && opts.tol < 1e-4) {
        return Err(Error::InvalidInput(format!("tol = {} outside (1e-13, 1e-4)", opts.tol)));
    }
    let t_min = opts.t_min.unwrap_or(-20.0 / c.mu_plus);
    if !(t_min < 0.0 && opts.t_max > 0.0) {
        return Err(Error::InvalidInput("need t_min < 0 < t_max".into()));
    }
    if !(opts.spacing > 0.0 && opts.delta > 0.0) {
        return Err(Error::InvalidInput("spacing and delta must be positive".into()));
    }

    let mu = c.mu_plus;
    let mut delta = opts.delta;
    let mut s_star = anchor_time(c, opts, delta)?;
    if -s_star > t_min {
        // Launch earlier so that the grid starts on the unstable manifold.
        delta *= (mu * (t_min + s_star - 1.0)).exp();
        if delta < 1e-280 {
            return Err(Error::InvalidInput(format!("t_min = {t_min} is too far out")));
        }
        s_star = anchor_time(c, opts, delta)?;
    }
    let t_launch = -s_star;

    let v_cap = 2.0 * c.sup_bound().powf(1.0 / (c.p() - 1.0));
    let h = opts.spacing;
    let mut t_grid = Vec::new();
    let mut v = Vec::new();
    let mut vp = Vec::new();
    let mut next = 0usize;
    let mut converged = false;
    let mut failure = None;

    let rhs = |_t: f64, y: &[f64; 2]| [y[1], profile_rhs(c, y[0], y[1])];
    let iopts = Options { h_max: h, ..Options::with_tol(opts.tol) };
    integrate::integrate(rhs, t_launch, [delta, delta * mu], opts.t_max, iopts, |s| {
        loop {
            let tk = t_min + next as f64 * h;
            if tk > s.t1 || tk > opts.t_max {
                break;
            }
            let y = if tk <= s.t0 { s.y0 } else { s.eval(tk) };
            next += 1;
            if !(y[0] > 0.0 && y[0] < v_cap) {
                failure = Some(Error::NoConvergence(format!(
                    "orbit left 0 < v < {v_cap} at t = {tk} (v = {})",
                    y[0]
                )));
                return false;
            }
            t_grid.push(tk);
            v.push(y[0]);
            vp.push(y[1]);
            if tk > 0.0 && (y[0] - c.v_inf).hypot(y[1]) < opts.tol {
                converged = true;
                return false;
            }
        }
        true
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "plateau v_inf not reached by t_max = {}",
            opts.t_max
        )));
    }
    Ok(RadialProfile {
        t_grid,
        v,
        v_prime: vp,
        constants: *c,
        far_coefficient: delta * (-mu * t_launch).exp(),
        shift: 0.0,
        tol: opts.tol,
    })
}

fn hermite(h: f64, s: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

impl RadialProfile {
    pub fn spacing(&self) -> f64 {
        self.t_grid[1] - self.t_grid[0]
    }

    pub fn t_first(&self) -> f64 {
        self.t_grid[0]
    }

    pub fn t_last(&self) -> f64 {
        *self.t_grid.last().unwrap()
    }

    /// `(v₁(t), v₁'(t))` by cubic Hermite interpolation, with the asymptotes
    /// outside the tabulated range.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let c = &self.constants;
        if t <= self.t_first() {
            let v = self.far_coefficient * (c.mu_plus * t).exp();
            return (v, c.mu_plus * v);
        }
        if t >= self.t_last() {
            return (c.v_inf, 0.0);
        }
        let h = self.spacing();
        let x = (t - self.t_first()) / h;
        let k = (x.floor() as usize).min(self.t_grid.len() - 2);
        let s = x - k as f64;
        let (v0, v1) = (self.v[k], self.v[k + 1]);
        let (d0, d1) = (self.v_prime[k], self.v_prime[k + 1]);
        let a0 = profile_rhs(c, v0, d0);
        let a1 = profile_rhs(c, v1, d1);
        (hermite(h, s, v0, v1, d0, d1), hermite(h, s, d0, d1, a0, a1))
    }

    /// `u_ε(r) = r^(-a) v₁(-log(r/ε))`.
    pub fn u_of_r(&self, epsilon: f64, r: f64) -> f64 {
        let t = -(r / epsilon).ln();
        r.powf(-self.constants.a) * self.eval(t).0
    }

    /// `u_ε'(r) = -r^(-a-1) (a v + v')`.
    pub fn du_dr(&self, epsilon: f64, r: f64) -> f64 {
        let t = -(r / epsilon).ln();
        let (v, vp) = self.eval(t);
        let a = self.constants.a;
        -r.powf(-a - 1.0) * (a * v + vp)
    }

    /// `u_ε''(r)`, from the radial equation `u'' = -(N-1)u'/r - u^p`.
    pub fn d2u_dr2(&self, epsilon: f64, r: f64) -> f64 {
        let n = self.constants.n();
        let u = self.u_of_r(epsilon, r);
        -(n - 1.0) * self.du_dr(epsilon, r) / r - u.abs().powf(self.constants.p())
    }

    /// `V(r) = r² p u₁(r)^(p-1) = p v₁(-log r)^(p-1)`.
    pub fn potential(&self, r: f64) -> f64 {
        let c = &self.constants;
        c.p() * self.eval(-r.ln()).0.powf(c.p() - 1.0)
    }

    /// Maximum of `v` over grid nodes with `t_lo <= t <= t_hi`.
    pub fn sup_between(&self, t_lo: f64, t_hi: f64) -> f64 {
        self.t_grid
            .iter()
            .zip(&self.v)
            .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }

    /// Minimum of `v` over grid nodes with `t_lo <= t <= t_hi`.
    pub fn inf_between(&self, t_lo: f64, t_hi: f64) -> f64 {
        self.t_grid
            .iter()
            .zip(&self.v)
            .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min)
    }

    /// Relative margin `1 - sup v^(p-1) / (((p+1)/2) v_inf^(p-1))`.
    pub fn sup_bound_margin(&self) -> f64 {
        let c = &self.constants;
        let vmax = self.v.iter().cloned().fold(0.0, f64::max);
        1.0 - vmax.powf(c.p() - 1.0) / c.sup_bound()
    }

    /// Least-squares slope of `log v` against `t` over the far tail, where
    /// `v < 1e-4 v_inf`.
    pub fn tail_slope(&self) -> f64 {
        let cut = 1e-4 * self.constants.v_inf;
        let pts: Vec<(f64, f64)> = self
            .t_grid
            .iter()
            .zip(&self.v)
            .take_while(|(_, v)| **v < cut)
            .map(|(t, v)| (*t, v.ln()))
            .collect();
        if pts.len() < 2 {
            return f64::NAN;
        }
        let n = pts.len() as f64;
        let (mt, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
        let (num, den) = pts
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mt) * (p.1 - my), a.1 + (p.0 - mt).powi(2)));
        num / den
    }

    /// Per-node residual of the first-order system, using sixth-order
    /// differences of the tabulated `v` and `v'`.
    pub fn ode_residual(&self) -> Vec<f64> {
        ode_residual_of(&self.constants, self.spacing(), &self.v, &self.v_prime)
    }

    /// Largest increase of the Hamiltonian between consecutive nodes.
    pub fn max_energy_increase(&self) -> f64 {
        let c = &self.constants;
        let h: Vec<f64> = self.v.iter().zip(&self.v_prime).map(|(v, d)| hamiltonian(c, *v, *d)).collect();
        h.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

const D1_CENTRAL: [f64; 7] = [-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0];
const D1_EDGE: [[f64; 7]; 3] = [
    [-147.0, 360.0, -450.0, 400.0, -225.0, 72.0, -10.0],
    [-10.0, -77.0, 150.0, -100.0, 50.0, -15.0, 2.0],
    [2.0, -24.0, -35.0, 80.0, -30.0, 8.0, -1.0],
];

/// Sixth-order first derivative of uniformly spaced samples.
pub fn derivative6(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 7, "need at least 7 samples");
    let mut d = vec![0.0; n];
    for i in 0..n {
        let acc: f64 = if i < 3 {
            (0..7).map(|j| D1_EDGE[i][j] * y[j]).sum()
        } else if i + 3 >= n {
            let m = n - 1 - i;
            -(0..7).map(|j| D1_EDGE[m][j] * y[n - 1 - j]).sum::<f64>()
        } else {
            (0..7).map(|j| D1_CENTRAL[j] * y[i + j - 3]).sum()
        };
        d[i] = acc / (60.0 * h);
    }
    d
}

/// Residual `max(|Dv - v'|, |Dv' - F(v, v')|)` at each node of a uniform grid.
pub fn ode_residual_of(c: &DerivedConstants, h: f64, v: &[f64], vp: &[f64]) -> Vec<f64> {
    let dv = derivative6(v, h);
    let dvp = derivative6(vp, h);
    (0..v.len())
        .map(|i| (dv[i] - vp[i]).abs().max((dvp[i] - profile_rhs(c, v[i], vp[i])).abs()))
        .collect()
}

/// Translates the orbit to the right until `sup_{t <= 0} v ≤ alpha`.
///
/// The result is `t ↦ v₁(t - s)` with the smallest such `s ≥ 0`.
pub fn normalize_profile(profile: &RadialProfile, alpha: f64) -> Result<RadialProfile> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must be positive")));
    }
    let sup0 = profile.sup_between(f64::NEG_INFINITY, 0.0).max(profile.eval(0.0).0);
    if sup0 <= alpha {
        return Ok(profile.clone());
    }
    let mu = profile.constants.mu_plus;
    // First time the orbit reaches alpha; the orbit increases up to there.
    let t_cross = match profile.v.iter().position(|v| *v > alpha) {
        Some(0) | None => (alpha / profile.far_coefficient).ln() / mu,
        Some(k) => {
            let (mut lo, mut hi) = (profile.t_grid[k - 1], profile.t_grid[k]);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if profile.eval(mid).0 <= alpha {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    };
    let s = -t_cross;
    let mut out = profile.clone();
    for t in &mut out.t_grid {
        *t += s;
    }
    out.far_coefficient *= (-mu * s).exp();
    out.shift += s;
    Ok(out)
}
